#pragma once

#include "ecx/catalog.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecx {

// One row of a raw employment table. Exactly one of employment / suppression_flag is set.
struct RawEmploymentRecord {
    int year = 0;
    std::string region_code;
    std::string industry_code;
    std::optional<std::int64_t> employment;
    std::optional<std::string> suppression_flag;
};

struct RejectedRow {
    std::size_t line = 0;
    std::string reason;
};

// Column map for parse_employment_table.
struct TableSchema {
    std::string year_column = "year";
    // Concatenated in order to form the region code (e.g. {"fipstate", "fipscty"}).
    std::vector<std::string> region_columns = {"region"};
    std::string industry_column = "industry";
    std::string employment_column = "employment";
    std::string flag_column = "flag";
    char delimiter = ',';
    // Used when the file has no year column (one file per year).
    std::optional<int> fixed_year;
    int first_year = 2007;
    int last_year = 2015;
    // Some publishers write count 0 next to the size flag; treat that as flag-only.
    bool zero_count_with_flag_is_suppressed = false;
    // Industry codes containing any of these characters are roll-up lines ("------", "4471//")
    // and are counted in `skipped` rather than parsed.
    std::string rollup_markers;
};

struct ParseResult {
    std::vector<RawEmploymentRecord> records;
    std::vector<RejectedRow> rejects;
    std::size_t skipped = 0;
};

ParseResult parse_employment_table(const std::filesystem::path& file, const TableSchema& schema);
ParseResult parse_employment_text(std::string_view text, const TableSchema& schema);

struct SizeClass {
    std::string flag;
    double lower = 0;
    std::optional<double> upper;  // nullopt: open-ended top class
    double imputed = 0;
};

// Suppression flag -> employment bounds -> imputed value.
class SizeClassTable {
public:
    explicit SizeClassTable(std::vector<SizeClass> classes, std::string open_class_policy = {});

    // Bounded class with the arithmetic midpoint as imputed value.
    static SizeClass midpoint_class(std::string flag, double lower, double upper);

    // The twelve County Business Patterns employment size classes A..M. The open top class
    // is imputed at its lower bound; `open_class_policy()` records that.
    static SizeClassTable cbp_default();

    // Columns flag,lower,upper,imputed. Empty upper means open-ended; empty imputed means
    // midpoint (bounded classes only).
    static SizeClassTable load(const std::filesystem::path& path, char delim = ',');

    const SizeClass* find(std::string_view flag) const;
    const std::vector<SizeClass>& classes() const { return classes_; }
    const std::string& open_class_policy() const { return open_class_policy_; }

private:
    std::vector<SizeClass> classes_;
    std::string open_class_policy_;
};

struct PanelRecord {
    int year = 0;
    std::uint32_t region = 0;
    std::uint32_t industry = 0;
    double employment = 0;
    // Portion of `employment` that came from size-class imputation.
    double imputed = 0;
    bool imputed_flag = false;

    bool is_imputed() const { return imputed_flag; }
};

// Long-form (year, region, industry) -> employment. Catalogs are sorted by code and
// records sorted by (year, region id, industry id) with unique keys.
class EmploymentPanel {
public:
    EmploymentPanel() = default;

    const Catalog& regions() const { return regions_; }
    const Catalog& industries() const { return industries_; }
    const std::vector<PanelRecord>& records() const { return records_; }
    bool empty() const { return records_.empty(); }

    std::vector<int> years() const;
    double total_employment() const;
    double total_imputed() const;
    std::size_t imputed_cells() const;

    bool operator==(const EmploymentPanel& other) const;

    friend class PanelBuilder;

private:
    Catalog regions_;
    Catalog industries_;
    std::vector<PanelRecord> records_;
};

// Accumulates cells by external code; repeated keys are summed in insertion order.
class PanelBuilder {
public:
    void add(int year, std::string_view region, std::string_view industry, double employment, double imputed,
             bool imputed_flag);
    EmploymentPanel build() &&;

private:
    struct Cell {
        int year;
        std::uint32_t region;
        std::uint32_t industry;
        double employment;
        double imputed;
        bool imputed_flag;
    };
    std::uint32_t intern(std::unordered_map<std::string, std::uint32_t>& map, std::vector<std::string>& codes,
                         std::string_view code);

    std::unordered_map<std::string, std::uint32_t> region_ids_;
    std::unordered_map<std::string, std::uint32_t> industry_ids_;
    std::vector<std::string> region_codes_;
    std::vector<std::string> industry_codes_;
    std::vector<Cell> cells_;
};

// Replaces each flagged record by its class's imputed value. Throws ConfigError naming an
// unknown flag; throws std::invalid_argument on duplicate (year, region, industry) keys.
EmploymentPanel impute_suppressed(const std::vector<RawEmploymentRecord>& records, const SizeClassTable& table);

enum class CrosswalkKind { geographic, industry };

// Functional code -> code mapping (county -> CBSA, NAICS -> cluster).
class Crosswalk {
public:
    explicit Crosswalk(CrosswalkKind kind) : kind_(kind) {}

    static Crosswalk load(const std::filesystem::path& path, CrosswalkKind kind, char delim = ',');
    static Crosswalk identity(CrosswalkKind kind, const Catalog& codes);

    // Throws ConfigError if `source` is already mapped to a different target.
    void add(const std::string& source, const std::string& target);
    std::optional<std::string> lookup(std::string_view source) const;

    CrosswalkKind kind() const { return kind_; }
    std::size_t size() const { return mapping_.size(); }

private:
    CrosswalkKind kind_;
    std::map<std::string, std::string, std::less<>> mapping_;
};

// code -> attribute name -> value (traded/local tags, census region, metro class).
class AttributeTable {
public:
    static AttributeTable load(const std::filesystem::path& path, char delim = ',');

    void set(const std::string& code, const std::string& attribute, const std::string& value);
    std::optional<std::string> value(std::string_view code, std::string_view attribute) const;

private:
    std::map<std::string, std::map<std::string, std::string, std::less<>>, std::less<>> values_;
};

struct CodeIssue {
    std::string code;
    std::string reason;
};

struct AggregationReport {
    std::vector<CodeIssue> issues;   // codes whose records were dropped
    double dropped_employment = 0;
};

// Sums counties into CBSAs; counties missing from the crosswalk stay as their own regions.
EmploymentPanel aggregate_geography(const EmploymentPanel& panel, const Crosswalk& crosswalk);

// Truncates industry codes to `digits` (2..6) characters and sums children.
EmploymentPanel aggregate_industry(const EmploymentPanel& panel, int digits, AggregationReport* report = nullptr);
// Maps industry codes through a cluster crosswalk; unmapped codes are dropped and reported.
EmploymentPanel aggregate_industry(const EmploymentPanel& panel, const Crosswalk& clusters,
                                   AggregationReport* report = nullptr);

// Drops industries whose code starts with any of the prefixes.
EmploymentPanel exclude_industries(const EmploymentPanel& panel, const std::vector<std::string>& prefixes);

// Dense region x industry employment for one year. Only entities with a record that
// year are included; missing cells are 0.
struct EmploymentMatrix {
    int year = 0;
    Catalog regions;
    Catalog industries;
    Eigen::MatrixXd values;
};

EmploymentMatrix build_matrix(const EmploymentPanel& panel, int year);

// Canonical text form: year,region,industry,employment,imputed(0/1).
std::string serialize_panel(const EmploymentPanel& panel, char delim = ',');
EmploymentPanel parse_panel(std::string_view text, char delim = ',');
void write_panel(const EmploymentPanel& panel, const std::filesystem::path& path, char delim = ',');
EmploymentPanel read_panel(const std::filesystem::path& path, char delim = ',');

}  // namespace ecx
