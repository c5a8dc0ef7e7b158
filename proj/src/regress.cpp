#include "ecx/regress.hpp"

#include "ecx/error.hpp"
#include "ecx/textio.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace ecx {

std::string_view to_string(SeKind k)
{
    return k == SeKind::hc1 ? "HC1" : "classical";
}

SeKind parse_se_kind(std::string_view name)
{
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "hc1" || lower == "robust") return SeKind::hc1;
    if (lower == "classical" || lower == "iid") return SeKind::classical;
    throw ConfigError("unknown standard-error kind '" + std::string(name) + "' (expected hc1 or classical)");
}

std::string_view to_string(ModelKind k)
{
    switch (k) {
    case ModelKind::cross_section: return "cross_section";
    case ModelKind::period_growth: return "period_growth";
    case ModelKind::panel_lsdv: return "panel_lsdv";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name)
{
    if (name == "cross_section") return ModelKind::cross_section;
    if (name == "period_growth") return ModelKind::period_growth;
    if (name == "panel_lsdv" || name == "panel") return ModelKind::panel_lsdv;
    throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string stars(double p)
{
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

const Term* RegressionResult::term(const std::string& name) const
{
    for (const auto& t : terms) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// estimation core

namespace {

struct Fit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtx_inv;
    Eigen::VectorXd resid;
};

Fit fit_least_squares(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names)
{
    const auto n = x.rows();
    const auto k = x.cols();
    if (y.size() != n) throw ConfigError("outcome and design matrix have different row counts");
    if (n <= k) {
        throw ConfigError("need more observations than regressors (n = " + std::to_string(n) +
                          ", k = " + std::to_string(k) + ")");
    }
    if (!x.allFinite() || !y.allFinite()) throw NumericError("non-finite value in regression data");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < k; ++j) {
            const auto idx = static_cast<std::size_t>(perm(j));
            if (!cols.empty()) cols += ", ";
            cols += idx < names.size() ? names[idx] : "column " + std::to_string(idx);
        }
        throw NumericError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                           std::to_string(k) + "); collinear: " + cols);
    }
    Fit f;
    f.beta = qr.solve(y);
    f.resid = y - x * f.beta;
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
    const auto& p = qr.colsPermutation();
    f.xtx_inv = p * inner * p.transpose();
    return f;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Fit& f, SeKind se_kind)
{
    const auto n = static_cast<double>(x.rows());
    const auto k = static_cast<double>(x.cols());
    if (se_kind == SeKind::classical) {
        const double s2 = f.resid.squaredNorm() / (n - k);
        return s2 * f.xtx_inv;
    }
    const Eigen::MatrixXd xe = x.array().colwise() * f.resid.array();
    const Eigen::MatrixXd meat = xe.transpose() * xe;
    return (n / (n - k)) * f.xtx_inv * meat * f.xtx_inv;
}

Term make_term(std::string name, double coef, double var, double df)
{
    Term t;
    t.name = std::move(name);
    t.coef = coef;
    t.se = std::sqrt(std::max(var, 0.0));
    if (t.se > 0) {
        t.t = coef / t.se;
        boost::math::students_t dist(df);
        t.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t.t)));
    } else if (coef == 0) {
        t.t = 0;
        t.p = 1;
    } else {
        t.t = coef > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        t.p = 0;
    }
    return t;
}

// F statistic for dropping `q` columns: ((rss_r - rss_u)/q) / (rss_u/df).
void set_f(RegressionResult& res, double rss_restricted, double rss, int q, int df)
{
    res.f_df1 = q;
    res.f_df2 = df;
    if (q <= 0) {
        res.f_stat = std::numeric_limits<double>::quiet_NaN();
        res.f_p = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    const double explained = std::max(rss_restricted - rss, 0.0);
    if (rss <= 0) {
        res.f_stat = explained > 0 ? std::numeric_limits<double>::infinity() : 0.0;
        res.f_p = explained > 0 ? 0.0 : 1.0;
        return;
    }
    res.f_stat = (explained / q) / (rss / df);
    boost::math::fisher_f dist(q, df);
    res.f_p = boost::math::cdf(boost::math::complement(dist, res.f_stat));
}

}  // namespace

RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                     SeKind se_kind, bool has_intercept)
{
    if (names.size() != static_cast<std::size_t>(x.cols())) throw ConfigError("one name per design column required");
    const auto fit = fit_least_squares(y, x, names);
    const auto cov = covariance(x, fit, se_kind);
    const auto n = static_cast<double>(x.rows());
    const auto k = static_cast<double>(x.cols());
    const double df = n - k;

    RegressionResult res;
    res.se_kind = se_kind;
    res.n_obs = static_cast<std::size_t>(x.rows());
    res.covariance = cov;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        res.terms.push_back(make_term(names[static_cast<std::size_t>(j)], fit.beta(j), cov(j, j), df));
    }
    const double rss = fit.resid.squaredNorm();
    const double tss = has_intercept ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
    res.r2 = tss > 0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 0.0;
    const double dof_total = has_intercept ? n - 1 : n;
    res.adj_r2 = 1.0 - (1.0 - res.r2) * dof_total / df;
    res.resid_se = std::sqrt(rss / df);
    res.r2_kind = has_intercept ? "centered" : "uncentered";
    set_f(res, tss, rss, static_cast<int>(k) - (has_intercept ? 1 : 0), static_cast<int>(df));
    return res;
}

RegressionResult lsdv(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                      const std::vector<std::size_t>& entity, const std::vector<std::size_t>& period, SeKind se_kind)
{
    const auto n = x.rows();
    if (names.size() != static_cast<std::size_t>(x.cols())) throw ConfigError("one name per regressor required");
    if (entity.size() != static_cast<std::size_t>(n) || period.size() != static_cast<std::size_t>(n) || y.size() != n) {
        throw ConfigError("lsdv: outcome, regressors and panel indices differ in length");
    }

    // Dense relabelling of entity and period levels in order of first appearance.
    auto relabel = [](const std::vector<std::size_t>& ids) {
        std::map<std::size_t, Eigen::Index> level;
        std::vector<Eigen::Index> out;
        out.reserve(ids.size());
        for (auto id : ids) out.push_back(level.try_emplace(id, static_cast<Eigen::Index>(level.size())).first->second);
        return std::pair{out, static_cast<Eigen::Index>(level.size())};
    };
    const auto [ent, n_ent] = relabel(entity);
    const auto [per, n_per] = relabel(period);

    const Eigen::Index n_dummy_cols = 1 + (n_ent - 1) + (n_per - 1);
    Eigen::MatrixXd dummies = Eigen::MatrixXd::Zero(n, n_dummy_cols);
    dummies.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (ent[static_cast<std::size_t>(i)] > 0) dummies(i, ent[static_cast<std::size_t>(i)]) = 1;
        if (per[static_cast<std::size_t>(i)] > 0) dummies(i, n_ent - 1 + per[static_cast<std::size_t>(i)]) = 1;
    }

    // Residual-maker for the dummy space.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> dqr(dummies);
    dqr.setThreshold(1e-10);
    auto within = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v - dummies * dqr.solve(v); };

    RegressionResult res;
    res.se_kind = se_kind;
    res.r2_kind = "within";
    std::vector<Eigen::Index> kept;
    std::vector<std::string> kept_names;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Eigen::VectorXd col = x.col(j);
        const double scale = std::max(col.norm(), 1.0);
        if (within(col).norm() <= 1e-9 * scale) {
            res.dropped_terms.push_back(names[static_cast<std::size_t>(j)]);
            res.warnings.push_back("'" + names[static_cast<std::size_t>(j)] +
                                   "' has no variation beyond the entity and period effects; dropped");
            continue;
        }
        kept.push_back(j);
        kept_names.push_back(names[static_cast<std::size_t>(j)]);
    }
    if (kept.empty()) throw NumericError("lsdv: no regressor varies within entities and periods");

    const auto k_slopes = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd design(n, k_slopes + n_dummy_cols);
    for (Eigen::Index j = 0; j < k_slopes; ++j) design.col(j) = x.col(kept[static_cast<std::size_t>(j)]);
    design.rightCols(n_dummy_cols) = dummies;
    std::vector<std::string> all_names = kept_names;
    all_names.emplace_back("(intercept)");
    for (Eigen::Index e = 1; e < n_ent; ++e) all_names.push_back("entity dummy " + std::to_string(e));
    for (Eigen::Index p = 1; p < n_per; ++p) all_names.push_back("period dummy " + std::to_string(p));

    const auto fit = fit_least_squares(y, design, all_names);
    const auto cov = covariance(design, fit, se_kind);
    const auto df = static_cast<double>(n - design.cols());

    res.n_obs = static_cast<std::size_t>(n);
    res.covariance = cov.topLeftCorner(k_slopes, k_slopes);
    for (Eigen::Index j = 0; j < k_slopes; ++j) {
        res.terms.push_back(make_term(kept_names[static_cast<std::size_t>(j)], fit.beta(j), cov(j, j), df));
    }
    const double rss = fit.resid.squaredNorm();
    const double tss_within = within(y).squaredNorm();
    res.r2 = tss_within > 0 ? std::clamp(1.0 - rss / tss_within, 0.0, 1.0) : 0.0;
    res.adj_r2 = 1.0 - (1.0 - res.r2) * (static_cast<double>(n) - 1.0) / df;
    res.resid_se = std::sqrt(rss / df);
    set_f(res, tss_within, rss, static_cast<int>(k_slopes), static_cast<int>(df));
    return res;
}

// ---------------------------------------------------------------------------
// dataset

Dataset Dataset::load(const std::filesystem::path& path, const std::string& entity_column,
                      const std::string& year_column, char delim)
{
    auto table = read_delimited(path, delim, true);
    const auto ecol = table.column(entity_column);
    const auto ycol = table.column(year_column);
    if (!ecol || !ycol) {
        throw SchemaError(path.string() + ": needs columns '" + entity_column + "' and '" + year_column + "'");
    }
    Dataset d;
    std::vector<std::size_t> value_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != *ecol && c != *ycol) {
            value_cols.push_back(c);
            d.columns_[table.header[c]];
        }
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = path.string() + ":" + std::to_string(table.line_numbers[r]);
        auto cell = [&](std::size_t c) { return c < row.size() ? trim(row[c]) : std::string{}; };
        auto year = parse_int(cell(*ycol));
        if (!year) throw SchemaError(where + ": bad year");
        const auto entity = cell(*ecol);
        if (d.index_.count({entity, static_cast<int>(*year)})) {
            throw SchemaError(where + ": duplicate (entity, year) " + entity + ", " + std::to_string(*year));
        }
        d.add_row(entity, static_cast<int>(*year));
        for (auto c : value_cols) {
            const auto text = cell(c);
            double v = std::numeric_limits<double>::quiet_NaN();
            if (!(text.empty() || text == "NA" || text == "NaN" || text == ".")) {
                auto parsed = parse_double(text);
                if (!parsed) throw SchemaError(where + ": non-numeric value '" + text + "' in " + table.header[c]);
                v = *parsed;
            }
            d.columns_[table.header[c]].back() = v;
        }
    }
    return d;
}

void Dataset::add_row(const std::string& entity, int year)
{
    if (!index_.emplace(std::pair{entity, year}, entities_.size()).second) {
        throw SchemaError("duplicate (entity, year) " + entity + ", " + std::to_string(year));
    }
    entities_.push_back(entity);
    years_.push_back(year);
    for (auto& [name, values] : columns_) values.push_back(std::numeric_limits<double>::quiet_NaN());
}

void Dataset::set(const std::string& column, std::size_t row, double value)
{
    auto& col = columns_[column];
    col.resize(entities_.size(), std::numeric_limits<double>::quiet_NaN());
    col.at(row) = value;
}

void Dataset::add_column(const std::string& name, std::vector<double> values)
{
    if (values.size() != entities_.size()) throw ConfigError("column '" + name + "' has the wrong length");
    columns_[name] = std::move(values);
}

const std::vector<double>& Dataset::column(const std::string& name) const
{
    auto it = columns_.find(name);
    if (it == columns_.end()) throw ConfigError("dataset has no column '" + name + "'");
    return it->second;
}

std::optional<std::size_t> Dataset::find(const std::string& entity, int year) const
{
    auto it = index_.find({entity, year});
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> Dataset::column_names() const
{
    std::vector<std::string> out;
    for (const auto& [name, values] : columns_) out.push_back(name);
    return out;
}

// ---------------------------------------------------------------------------
// model ladders

namespace {

std::vector<std::vector<std::string>> ladder(const ModelSpec& spec, std::vector<std::string>& warnings)
{
    auto without_outcome = [&](std::vector<std::string> group) {
        auto it = std::find(group.begin(), group.end(), spec.outcome);
        if (it != group.end()) {
            warnings.push_back("control '" + spec.outcome + "' is the outcome; left out");
            group.erase(it);
        }
        return group;
    };
    const auto econ = without_outcome(spec.controls.economic);
    const auto socio = without_outcome(spec.controls.sociodemographic);
    const auto inst = without_outcome(spec.controls.institutional);
    std::vector<std::string> all;
    for (const auto* g : {&econ, &socio, &inst}) all.insert(all.end(), g->begin(), g->end());
    return {{}, econ, socio, inst, all};
}

void require_columns(const Dataset& data, const ModelSpec& spec)
{
    std::vector<std::string> needed = {spec.outcome, spec.key_regressor};
    for (const auto* g : {&spec.controls.economic, &spec.controls.sociodemographic, &spec.controls.institutional}) {
        needed.insert(needed.end(), g->begin(), g->end());
    }
    std::string missing;
    std::set<std::string> seen;
    for (const auto& c : needed) {
        if (!data.has(c) && seen.insert(c).second) missing += (missing.empty() ? "" : ", ") + c;
    }
    if (!missing.empty()) throw ConfigError("dataset lacks required columns: " + missing);
}

bool has_year(const Dataset& data, int year)
{
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (data.year(r) == year) return true;
    }
    return false;
}

// Rows of candidate data as (outcome, regressor matrix) after listwise deletion.
struct Frame {
    std::vector<double> y;
    std::vector<std::vector<double>> x;  // per regressor
    std::vector<std::size_t> entity;
    std::vector<std::size_t> period;
    std::size_t candidates = 0;
};

RegressionResult fit_ols_column(const Frame& frame, const std::vector<std::string>& names, SeKind se_kind)
{
    const auto n = static_cast<Eigen::Index>(frame.y.size());
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(frame.y.data(), n);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(names.size()) + 1);
    for (std::size_t j = 0; j < names.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(frame.x[j].data(), n);
    }
    x.col(x.cols() - 1).setOnes();
    auto all_names = names;
    all_names.emplace_back("Constant");
    auto res = ols(y, x, all_names, se_kind, true);
    res.n_deleted = frame.candidates - res.n_obs;
    return res;
}

// Builds a frame from candidate rows; `value(row, name)` supplies each variable.
template <typename ValueFn>
Frame make_frame(const std::vector<std::size_t>& rows, const std::vector<std::string>& regressors, ValueFn value,
                 const std::function<double(std::size_t)>& outcome)
{
    Frame f;
    f.candidates = rows.size();
    f.x.resize(regressors.size());
    for (auto r : rows) {
        const double y = outcome(r);
        if (!std::isfinite(y)) continue;
        std::vector<double> xs;
        bool ok = true;
        for (const auto& name : regressors) {
            const double v = value(r, name);
            if (!std::isfinite(v)) {
                ok = false;
                break;
            }
            xs.push_back(v);
        }
        if (!ok) continue;
        f.y.push_back(y);
        for (std::size_t j = 0; j < xs.size(); ++j) f.x[j].push_back(xs[j]);
        f.entity.push_back(r);
    }
    return f;
}

}  // namespace

ResultSet run_cross_section(const Dataset& data, const ModelSpec& spec)
{
    if (spec.kind != ModelKind::cross_section) throw ConfigError("run_cross_section needs a cross_section spec");
    require_columns(data, spec);
    if (!has_year(data, spec.year)) throw ConfigError("year " + std::to_string(spec.year) + " not in dataset");
    if (!(spec.outcome_divisor > 0)) throw ConfigError("outcome_divisor must be positive");

    ResultSet out;
    out.spec = spec;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (data.year(r) == spec.year) rows.push_back(r);
    }
    const auto& y = data.column(spec.outcome);
    auto outcome = [&](std::size_t r) { return y[r] / spec.outcome_divisor; };
    auto value = [&](std::size_t r, const std::string& name) { return data.column(name)[r]; };

    const auto groups = ladder(spec, out.warnings);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        std::vector<std::string> regs = {spec.key_regressor};
        regs.insert(regs.end(), groups[c].begin(), groups[c].end());
        auto frame = make_frame(rows, regs, value, outcome);
        auto res = fit_ols_column(frame, regs, spec.se_kind);
        res.label = "(" + std::to_string(c + 1) + ")";
        out.columns.push_back(std::move(res));
    }
    return out;
}

ResultSet run_period_growth(const Dataset& data, const ModelSpec& spec)
{
    if (spec.kind != ModelKind::period_growth) throw ConfigError("run_period_growth needs a period_growth spec");
    if (!(spec.start_year < spec.end_year)) throw ConfigError("period_growth needs start_year < end_year");
    require_columns(data, spec);
    if (!has_year(data, spec.start_year)) throw ConfigError("year " + std::to_string(spec.start_year) + " not in dataset");
    if (!has_year(data, spec.end_year)) throw ConfigError("year " + std::to_string(spec.end_year) + " not in dataset");

    ResultSet out;
    out.spec = spec;
    const auto& y = data.column(spec.outcome);

    // One candidate per entity seen in either year, keyed by its start-year row when present.
    std::set<std::string> entities;
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (data.year(r) == spec.start_year || data.year(r) == spec.end_year) entities.insert(data.entity(r));
    }
    std::vector<std::size_t> rows;         // start-year rows of matched entities
    std::vector<double> growth_by_row(data.size(), std::numeric_limits<double>::quiet_NaN());
    std::size_t unmatched = 0;
    for (const auto& e : entities) {
        auto s = data.find(e, spec.start_year);
        auto t = data.find(e, spec.end_year);
        if (!s || !t) {
            ++unmatched;
            continue;
        }
        rows.push_back(*s);
        const double start = y[*s];
        if (start != 0) growth_by_row[*s] = (y[*t] - start) / start;
    }
    if (unmatched > 0) {
        out.warnings.push_back(std::to_string(unmatched) + " entities missing " + std::to_string(spec.start_year) + " or " +
                               std::to_string(spec.end_year) + "; dropped");
    }

    const std::string level_name = spec.outcome + " in " + std::to_string(spec.start_year);
    auto outcome = [&](std::size_t r) { return growth_by_row[r]; };
    auto value = [&](std::size_t r, const std::string& name) {
        if (name == level_name) return y[r];
        return data.column(name)[r];
    };

    const auto groups = ladder(spec, out.warnings);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        std::vector<std::string> regs = {spec.key_regressor, level_name};
        regs.insert(regs.end(), groups[c].begin(), groups[c].end());
        auto frame = make_frame(rows, regs, value, outcome);
        auto res = fit_ols_column(frame, regs, spec.se_kind);
        res.n_deleted += unmatched;
        res.label = "(" + std::to_string(c + 1) + ")";
        out.columns.push_back(std::move(res));
    }
    return out;
}

ResultSet run_panel_lsdv(const Dataset& data, const ModelSpec& spec)
{
    if (spec.kind != ModelKind::panel_lsdv) throw ConfigError("run_panel_lsdv needs a panel_lsdv spec");
    require_columns(data, spec);
    if (!(spec.outcome_divisor > 0)) throw ConfigError("outcome_divisor must be positive");

    ResultSet out;
    out.spec = spec;
    std::vector<std::size_t> rows;
    std::set<int> years;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const int yr = data.year(r);
        if (spec.first_year && yr < *spec.first_year) continue;
        if (spec.last_year && yr > *spec.last_year) continue;
        rows.push_back(r);
        years.insert(yr);
    }
    if (years.size() < 2) throw ConfigError("panel regression needs at least 2 years");

    const auto& y = data.column(spec.outcome);
    const auto& key = data.column(spec.key_regressor);
    const std::string lag_name = "l." + spec.key_regressor;
    auto outcome = [&](std::size_t r) { return y[r] / spec.outcome_divisor; };
    auto value = [&](std::size_t r, const std::string& name) {
        if (name == lag_name) {
            auto prev = data.find(data.entity(r), data.year(r) - 1);
            return prev ? key[*prev] : std::numeric_limits<double>::quiet_NaN();
        }
        return data.column(name)[r];
    };

    const auto groups = ladder(spec, out.warnings);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        std::vector<std::string> regs = {lag_name};
        regs.insert(regs.end(), groups[c].begin(), groups[c].end());
        auto frame = make_frame(rows, regs, value, outcome);

        // Entities observed once carry no within information.
        std::map<std::string, std::size_t> per_entity;
        for (auto r : frame.entity) ++per_entity[data.entity(r)];
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < frame.entity.size(); ++i) {
            if (per_entity[data.entity(frame.entity[i])] >= 2) keep.push_back(i);
        }
        const std::size_t singletons = frame.entity.size() - keep.size();

        const auto n = static_cast<Eigen::Index>(keep.size());
        Eigen::VectorXd yv(n);
        Eigen::MatrixXd xv(n, static_cast<Eigen::Index>(regs.size()));
        std::vector<std::size_t> ent_ids;
        std::vector<std::size_t> per_ids;
        std::map<std::string, std::size_t> ent_index;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto src = keep[static_cast<std::size_t>(i)];
            const auto row = frame.entity[src];
            yv(i) = frame.y[src];
            for (std::size_t j = 0; j < regs.size(); ++j) xv(i, static_cast<Eigen::Index>(j)) = frame.x[j][src];
            ent_ids.push_back(ent_index.try_emplace(data.entity(row), ent_index.size()).first->second);
            per_ids.push_back(static_cast<std::size_t>(data.year(row)));
        }
        auto res = lsdv(yv, xv, regs, ent_ids, per_ids, spec.se_kind);
        res.n_deleted = frame.candidates - res.n_obs;
        if (singletons > 0) {
            res.warnings.push_back(std::to_string(singletons) + " observations from single-period entities dropped");
        }
        res.label = "(" + std::to_string(c + 1) + ")";
        out.columns.push_back(std::move(res));
    }
    return out;
}

ResultSet run_model(const Dataset& data, const ModelSpec& spec)
{
    switch (spec.kind) {
    case ModelKind::cross_section: return run_cross_section(data, spec);
    case ModelKind::period_growth: return run_period_growth(data, spec);
    case ModelKind::panel_lsdv: return run_panel_lsdv(data, spec);
    }
    throw ConfigError("unknown model kind");
}

// ---------------------------------------------------------------------------
// output

namespace {

std::string number(double v)
{
    if (!std::isfinite(v)) return format_double(v);
    const double a = std::abs(v);
    if (a != 0 && a < 0.0005) return format_fixed(v, 5);
    return format_fixed(v, 3);
}

std::string with_thousands(std::size_t n)
{
    auto s = std::to_string(n);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

}  // namespace

std::string format_table(const ResultSet& results, const std::string& title)
{
    // Row order: terms in order of first appearance across columns.
    std::vector<std::string> names;
    for (const auto& col : results.columns) {
        for (const auto& t : col.terms) {
            if (std::find(names.begin(), names.end(), t.name) == names.end()) names.push_back(t.name);
        }
    }
    // Constant goes last.
    auto cit = std::find(names.begin(), names.end(), "Constant");
    if (cit != names.end()) {
        names.erase(cit);
        names.emplace_back("Constant");
    }

    std::vector<std::vector<std::string>> grid;  // rows of cells; first cell is the label
    auto add_row = [&](std::vector<std::string> row) { grid.push_back(std::move(row)); };
    std::vector<std::string> head = {""};
    for (const auto& col : results.columns) head.push_back(col.label);
    add_row(head);
    const std::size_t rule_after_head = grid.size();
    for (const auto& name : names) {
        std::vector<std::string> coef = {name};
        std::vector<std::string> se = {""};
        for (const auto& col : results.columns) {
            const auto* t = col.term(name);
            coef.push_back(t ? number(t->coef) + stars(t->p) : "");
            se.push_back(t ? "(" + number(t->se) + ")" : "");
        }
        add_row(coef);
        add_row(se);
    }
    const std::size_t rule_before_footer = grid.size();
    const bool is_ols = results.spec.kind != ModelKind::panel_lsdv;
    auto footer = [&](const std::string& label, auto fn) {
        std::vector<std::string> row = {label};
        for (const auto& col : results.columns) row.push_back(fn(col));
        add_row(row);
    };
    footer("Observations", [](const RegressionResult& r) { return with_thousands(r.n_obs); });
    footer("R2", [](const RegressionResult& r) { return number(r.r2); });
    footer("Adjusted R2", [](const RegressionResult& r) { return number(r.adj_r2); });
    if (is_ols) footer("Residual Std. Error", [](const RegressionResult& r) { return number(r.resid_se); });
    footer("F Statistic", [](const RegressionResult& r) { return number(r.f_stat) + stars(r.f_p); });

    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    const std::string rule(total, '-');

    std::ostringstream out;
    out << title << '\n' << rule << '\n';
    for (std::size_t r = 0; r < grid.size(); ++r) {
        if (r == rule_after_head || r == rule_before_footer) out << rule << '\n';
        const auto& row = grid[r];
        for (std::size_t c = 0; c < row.size(); ++c) {
            const auto pad = width[c] - row[c].size();
            if (c == 0) {
                out << row[c] << std::string(pad + 2, ' ');
            } else {
                out << std::string(pad / 2 + 1, ' ') << row[c] << std::string(pad - pad / 2 + 1, ' ');
            }
        }
        out << '\n';
    }
    out << rule << '\n';
    out << "Note: *p<0.1; **p<0.05; ***p<0.01. Standard errors: " << to_string(results.spec.se_kind) << ".\n";
    for (const auto& w : results.warnings) out << "Warning: " << w << '\n';
    for (const auto& col : results.columns) {
        for (const auto& w : col.warnings) out << "Warning " << col.label << ": " << w << '\n';
    }
    return out.str();
}

std::string results_csv(const ResultSet& results)
{
    std::string out = "model,term,estimate,std_error,t,p,stars\n";
    for (const auto& col : results.columns) {
        for (const auto& t : col.terms) {
            out += col.label + "," + quote_field(t.name) + "," + format_double(t.coef) + "," + format_double(t.se) + "," +
                   format_double(t.t) + "," + format_double(t.p) + "," + stars(t.p) + "\n";
        }
        auto stat = [&](const char* name, double v) {
            out += col.label + "," + name + "," + format_double(v) + ",,,,\n";
        };
        stat("n_obs", static_cast<double>(col.n_obs));
        stat("n_deleted", static_cast<double>(col.n_deleted));
        stat("r2", col.r2);
        stat("adj_r2", col.adj_r2);
        stat("resid_se", col.resid_se);
        stat("f_stat", col.f_stat);
        stat("f_p", col.f_p);
    }
    return out;
}

}  // namespace ecx
