#pragma once

#include "ecx/catalog.hpp"
#include "ecx/ingest.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ecx {

// How industry presence is read off the employment matrix.
//   BM       LQ >= 1
//   RLQ      raw LQ
//   WM       region share of national industry employment
//   Presence X >= 1
//   CM       LQ >= 1 or X > cutoff
enum class Strategy { BM, RLQ, WM, Presence, CM };

inline constexpr Strategy kAllStrategies[] = {Strategy::BM, Strategy::RLQ, Strategy::WM, Strategy::Presence,
                                              Strategy::CM};

std::string_view to_string(Strategy s);
// Case-insensitive; throws ConfigError on unknown names.
Strategy parse_strategy(std::string_view name);
bool is_binary(Strategy s);

struct StrategyParams {
    double cutoff = 50.0;  // CM: employment strictly above this counts as present
};

struct InputMatrix {
    Strategy strategy = Strategy::Presence;
    bool binary = true;
    StrategyParams params;
    Catalog regions;
    Catalog industries;
    Eigen::MatrixXd values;

    // Wraps a bare matrix with synthetic catalogs R0000.., I0000.. (sorted == index order).
    static InputMatrix from_values(Eigen::MatrixXd values, Strategy strategy = Strategy::Presence);
};

// LQ_{r,i} = (X_{r,i} / sum_i X_{r,i}) / (sum_r X_{r,i} / sum X). Rows or columns with zero
// total give LQ 0. Throws DegenerateError when the grand total is not positive.
Eigen::MatrixXd location_quotient(const Eigen::MatrixXd& employment);

// Strategy matrix for a raw employment matrix. Throws ConfigError on a non-positive cutoff.
Eigen::MatrixXd strategy_values(const Eigen::MatrixXd& employment, Strategy strategy, const StrategyParams& params = {});

InputMatrix build_input_matrix(const EmploymentMatrix& employment, Strategy strategy, const StrategyParams& params = {});

struct PruneEntry {
    std::string code;
    std::string reason;
};

struct PruneReport {
    std::vector<PruneEntry> dropped_regions;
    std::vector<PruneEntry> dropped_industries;

    bool empty() const { return dropped_regions.empty() && dropped_industries.empty(); }
};

// Removes all-zero rows and columns until none remain. Throws DegenerateError when nothing is left.
std::pair<InputMatrix, PruneReport> prune_empty(const InputMatrix& m);

// True if no row and no column of `values` sums to zero.
bool is_pruned(const Eigen::MatrixXd& values);

// region,industry,value for every nonzero cell, in catalog order.
std::string matrix_triplets_csv(const InputMatrix& m);
// strategy, binary flag, params, dimensions and prune report.
std::string matrix_sidecar_json(const InputMatrix& m, const PruneReport& report);

}  // namespace ecx
