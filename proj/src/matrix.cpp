#include "ecx/matrix.hpp"

#include "ecx/error.hpp"
#include "ecx/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace ecx {

std::string_view to_string(Strategy s)
{
    switch (s) {
    case Strategy::BM: return "BM";
    case Strategy::RLQ: return "RLQ";
    case Strategy::WM: return "WM";
    case Strategy::Presence: return "Presence";
    case Strategy::CM: return "CM";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name)
{
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (auto s : kAllStrategies) {
        std::string candidate;
        for (char c : to_string(s)) candidate.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (candidate == lower) return s;
    }
    throw ConfigError("unknown input-matrix strategy '" + std::string(name) + "' (expected BM, RLQ, WM, Presence or CM)");
}

bool is_binary(Strategy s)
{
    return s == Strategy::BM || s == Strategy::Presence || s == Strategy::CM;
}

InputMatrix InputMatrix::from_values(Eigen::MatrixXd values, Strategy strategy)
{
    auto codes = [](Eigen::Index n, char prefix) {
        std::vector<std::string> out;
        out.reserve(static_cast<std::size_t>(n));
        char buf[32];
        for (Eigen::Index i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, "%c%05ld", prefix, static_cast<long>(i));
            out.emplace_back(buf);
        }
        return out;
    };
    InputMatrix m;
    m.strategy = strategy;
    m.binary = is_binary(strategy);
    m.regions = Catalog(codes(values.rows(), 'R'));
    m.industries = Catalog(codes(values.cols(), 'I'));
    m.values = std::move(values);
    return m;
}

Eigen::MatrixXd location_quotient(const Eigen::MatrixXd& x)
{
    const double total = x.sum();
    if (!(total > 0)) throw DegenerateError("employment matrix has no positive grand total");
    const Eigen::VectorXd row_total = x.rowwise().sum();
    const Eigen::RowVectorXd col_total = x.colwise().sum();
    Eigen::MatrixXd lq = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        if (col_total(i) <= 0) continue;
        const double national_share = col_total(i) / total;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            if (row_total(r) <= 0) continue;
            lq(r, i) = (x(r, i) / row_total(r)) / national_share;
        }
    }
    return lq;
}

Eigen::MatrixXd strategy_values(const Eigen::MatrixXd& x, Strategy strategy, const StrategyParams& params)
{
    if ((x.array() < 0).any() || !x.allFinite()) throw ConfigError("employment matrix must be finite and nonnegative");
    switch (strategy) {
    case Strategy::BM: {
        return (location_quotient(x).array() >= 1.0).cast<double>().matrix();
    }
    case Strategy::RLQ: return location_quotient(x);
    case Strategy::WM: {
        Eigen::MatrixXd wm = Eigen::MatrixXd::Zero(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            const double col = x.col(i).sum();
            if (col > 0) wm.col(i) = x.col(i) / col;
        }
        return wm;
    }
    case Strategy::Presence: return (x.array() >= 1.0).cast<double>().matrix();
    case Strategy::CM: {
        if (!(params.cutoff > 0) || !std::isfinite(params.cutoff)) {
            throw ConfigError("CM cutoff must be a positive number");
        }
        const Eigen::MatrixXd lq = location_quotient(x);
        return ((lq.array() >= 1.0) || (x.array() > params.cutoff)).cast<double>().matrix();
    }
    }
    throw ConfigError("unknown input-matrix strategy");
}

InputMatrix build_input_matrix(const EmploymentMatrix& employment, Strategy strategy, const StrategyParams& params)
{
    InputMatrix m;
    m.strategy = strategy;
    m.binary = is_binary(strategy);
    m.params = params;
    m.regions = employment.regions;
    m.industries = employment.industries;
    m.values = strategy_values(employment.values, strategy, params);
    return m;
}

bool is_pruned(const Eigen::MatrixXd& values)
{
    if (values.size() == 0) return false;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        if ((values.row(r).array() == 0).all()) return false;
    }
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        if ((values.col(c).array() == 0).all()) return false;
    }
    return true;
}

std::pair<InputMatrix, PruneReport> prune_empty(const InputMatrix& m)
{
    PruneReport report;
    std::vector<std::size_t> rows(static_cast<std::size_t>(m.values.rows()));
    std::vector<std::size_t> cols(static_cast<std::size_t>(m.values.cols()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;

    auto row_empty = [&](std::size_t r) {
        return std::all_of(cols.begin(), cols.end(), [&](std::size_t c) {
            return m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == 0;
        });
    };
    auto col_empty = [&](std::size_t c) {
        return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) {
            return m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == 0;
        });
    };

    for (int pass = 0;; ++pass) {
        const std::string why = pass == 0 ? "all-zero" : "all-zero after earlier removals";
        std::vector<std::size_t> keep_rows;
        std::vector<std::size_t> keep_cols;
        for (auto r : rows) {
            if (row_empty(r)) {
                report.dropped_regions.push_back({m.regions.code(r), why});
            } else {
                keep_rows.push_back(r);
            }
        }
        for (auto c : cols) {
            if (col_empty(c)) {
                report.dropped_industries.push_back({m.industries.code(c), why});
            } else {
                keep_cols.push_back(c);
            }
        }
        const bool changed = keep_rows.size() != rows.size() || keep_cols.size() != cols.size();
        rows = std::move(keep_rows);
        cols = std::move(keep_cols);
        if (!changed || rows.empty() || cols.empty()) break;
    }
    if (rows.empty() || cols.empty()) throw DegenerateError("degenerate network: matrix is empty after pruning");

    InputMatrix out;
    out.strategy = m.strategy;
    out.binary = m.binary;
    out.params = m.params;
    out.regions = m.regions.subset(rows);
    out.industries = m.industries.subset(cols);
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                m.values(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
        }
    }
    return {std::move(out), std::move(report)};
}

std::string matrix_triplets_csv(const InputMatrix& m)
{
    std::string out = "region,industry,value\n";
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
            const double v = m.values(r, c);
            if (v == 0) continue;
            out += quote_field(m.regions.code(static_cast<std::size_t>(r)));
            out += ',';
            out += quote_field(m.industries.code(static_cast<std::size_t>(c)));
            out += ',';
            out += format_double(v);
            out += '\n';
        }
    }
    return out;
}

std::string matrix_sidecar_json(const InputMatrix& m, const PruneReport& report)
{
    nlohmann::ordered_json j;
    j["strategy"] = std::string(to_string(m.strategy));
    j["binary"] = m.binary;
    j["params"] = {{"cutoff", m.params.cutoff}};
    j["regions"] = m.values.rows();
    j["industries"] = m.values.cols();
    auto entries = [](const std::vector<PruneEntry>& v) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (const auto& e : v) a.push_back({{"code", e.code}, {"reason", e.reason}});
        return a;
    };
    j["prune_report"] = {{"dropped_regions", entries(report.dropped_regions)},
                         {"dropped_industries", entries(report.dropped_industries)}};
    return j.dump(2) + "\n";
}

}  // namespace ecx
