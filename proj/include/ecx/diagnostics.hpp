#pragma once

#include "ecx/catalog.hpp"
#include "ecx/complexity.hpp"
#include "ecx/ingest.hpp"
#include "ecx/matrix.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ecx {

// Matrix reordered for the triangularity plot: rows by ascending diversity, columns by
// descending ubiquity, so a nested matrix comes out lower-triangular (row 0 is the least
// diverse region, column 0 the most ubiquitous industry).
struct OrderedMatrixView {
    Strategy strategy = Strategy::Presence;
    std::vector<std::size_t> region_order;    // region_order[k] = original row shown at rank k
    std::vector<std::size_t> industry_order;  // industry_order[k] = original column shown at rank k
    Eigen::VectorXd diversity;                // in display order
    Eigen::VectorXd ubiquity;                 // in display order
    Catalog regions;                          // in display order
    Catalog industries;                       // in display order
    Eigen::MatrixXd values;                   // raw values, reordered
};

// Stable ordering; ties broken by total employment (same direction as the main key) when
// supplied, then by catalog position.
OrderedMatrixView order_for_triangularity(const InputMatrix& m, const Eigen::VectorXd* region_employment = nullptr,
                                          const Eigen::VectorXd* industry_employment = nullptr);

// True if values(r, c) != 0 exactly when c < width(r) for a non-decreasing staircase
// width(r) >= 1, i.e. the reordered matrix is a filled lower-left staircase.
bool is_lower_triangular_staircase(const Eigen::MatrixXd& values);

enum class HeatmapFormat { svg, triplet_csv };
// "svg" or "csv"/"triplet-csv"; throws ConfigError otherwise (including empty).
HeatmapFormat parse_heatmap_format(std::string_view name);

// Value used for shading: RLQ is top-coded at 10, other strategies are drawn raw.
double display_value(Strategy strategy, double value);

// SVG 1.1, one 1x1 rect per nonzero cell. Regions run left to right by rank, industries
// bottom to top by rank. Grey level = display value / max display value.
std::string heatmap_svg(const OrderedMatrixView& view);
// row_rank,col_rank,value for nonzero cells (raw values).
std::string heatmap_triplets_csv(const OrderedMatrixView& view);
// Rebuilds the dense ordered matrix from heatmap_triplets_csv output.
Eigen::MatrixXd parse_heatmap_triplets(std::string_view text, Eigen::Index rows, Eigen::Index cols);

void export_heatmap(const OrderedMatrixView& view, const std::filesystem::path& path, HeatmapFormat format);

// Scores keyed by entity code.
struct ScoreSeries {
    std::vector<std::string> codes;
    std::vector<double> values;
};

ScoreSeries region_series(const ComplexityScores& s);
ScoreSeries industry_series(const ComplexityScores& s);

struct AlignedPair {
    std::vector<std::string> codes;
    std::vector<double> a;
    std::vector<double> b;
    std::size_t dropped = 0;  // entities present in only one series
};

// Inner join on codes, in the order of `a`.
AlignedPair align(const ScoreSeries& a, const ScoreSeries& b);

enum class Transform { none, log };
enum class CorrelationKind { pearson, spearman };

// Throws ConfigError for length mismatch or n < 3, NumericError for nonpositive values under
// log or zero variance.
double correlate(std::span<const double> a, std::span<const double> b, Transform transform_b = Transform::none,
                 CorrelationKind kind = CorrelationKind::pearson);

// Average ranks (1-based), ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> x);

struct GroupRow {
    std::string label;
    std::size_t count = 0;
    double mean = 0;
    double sd = 0;  // sample sd; 0 for singleton groups
};

struct GroupSummary {
    std::string grouping;
    std::vector<GroupRow> rows;  // sorted by label
};

// Entities without a value for `attribute` fall into "unclassified".
GroupSummary group_summary(const ScoreSeries& scores, const AttributeTable& attributes, const std::string& attribute);

struct RankedEntry {
    std::size_t rank = 0;  // 1-based
    std::string code;
    std::string label;
    std::string tag;
    double score = 0;
};

struct RankedTable {
    std::vector<RankedEntry> top;     // highest first
    std::vector<RankedEntry> bottom;  // lowest first
};

// Label comes from attribute "label", tag from `tag_attribute` (default "traded_local").
RankedTable top_bottom(const ScoreSeries& scores, std::size_t n, const AttributeTable* attributes = nullptr,
                       const std::string& tag_attribute = "traded_local");

std::string group_summary_csv(const GroupSummary& g);
std::string group_summary_text(const GroupSummary& g);
std::string ranked_table_csv(const RankedTable& t);
std::string ranked_table_text(const RankedTable& t);

}  // namespace ecx
