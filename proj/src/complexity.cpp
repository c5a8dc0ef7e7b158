#include "ecx/complexity.hpp"

#include "ecx/error.hpp"
#include "ecx/textio.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace ecx {

std::string_view to_string(IndexKind k)
{
    return k == IndexKind::ECI ? "eci" : "fi";
}

IndexKind parse_index_kind(std::string_view name)
{
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "eci") return IndexKind::ECI;
    if (lower == "fi" || lower == "fitness") return IndexKind::FI;
    throw ConfigError("unknown complexity index '" + std::string(name) + "' (expected eci or fi)");
}

DegreeVectors degrees(const Eigen::MatrixXd& m)
{
    if (m.size() == 0) throw DegenerateError("empty matrix");
    if ((m.array() < 0).any() || !m.allFinite()) throw NumericError("input matrix must be finite and nonnegative");
    DegreeVectors d{m.rowwise().sum(), m.colwise().sum().transpose()};
    for (Eigen::Index r = 0; r < d.diversity.size(); ++r) {
        if (!(d.diversity(r) > 0)) {
            throw DegenerateError("region " + std::to_string(r) + " has zero diversity; run prune_empty first");
        }
    }
    for (Eigen::Index i = 0; i < d.ubiquity.size(); ++i) {
        if (!(d.ubiquity(i) > 0)) {
            throw DegenerateError("industry " + std::to_string(i) + " has zero ubiquity; run prune_empty first");
        }
    }
    return d;
}

ReflectionsTrace method_of_reflections(const Eigen::MatrixXd& m, int n_max)
{
    if (n_max < 0) throw ConfigError("method_of_reflections needs n_max >= 0");
    const auto d = degrees(m);
    ReflectionsTrace trace;
    trace.region.reserve(static_cast<std::size_t>(n_max) + 1);
    trace.industry.reserve(static_cast<std::size_t>(n_max) + 1);
    trace.region.push_back(d.diversity);
    trace.industry.push_back(d.ubiquity);
    for (int n = 1; n <= n_max; ++n) {
        const auto& prev_r = trace.region.back();
        const auto& prev_i = trace.industry.back();
        Eigen::VectorXd next_r = (m * prev_i).cwiseQuotient(d.diversity);
        Eigen::VectorXd next_i = (m.transpose() * prev_r).cwiseQuotient(d.ubiquity);
        trace.region.push_back(std::move(next_r));
        trace.industry.push_back(std::move(next_i));
    }
    return trace;
}

Eigen::MatrixXd region_transition(const Eigen::MatrixXd& m)
{
    const auto d = degrees(m);
    return d.diversity.cwiseInverse().asDiagonal() * m * d.ubiquity.cwiseInverse().asDiagonal() * m.transpose();
}

Eigen::VectorXd standardize(const Eigen::VectorXd& x)
{
    const auto n = static_cast<double>(x.size());
    if (x.size() == 0) throw NumericError("cannot standardize an empty vector");
    const double mean = x.mean();
    const Eigen::VectorXd centered = x.array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / n);
    if (!(sd > 0) || !std::isfinite(sd)) throw NumericError("cannot standardize a vector with zero variance");
    Eigen::VectorXd z = centered / sd;
    // One correction pass removes the rounding left in mean and sd.
    z.array() -= z.mean();
    z /= std::sqrt(z.squaredNorm() / n);
    return z;
}

namespace {

double covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return ((a.array() - a.mean()) * (b.array() - b.mean())).mean();
}

// Flips `z` so that cov(z, key) >= 0. When the covariance vanishes, the first entry of
// clearly nonzero magnitude is made positive.
void orient(Eigen::VectorXd& z, const Eigen::VectorXd& key, std::vector<std::string>& warnings, const char* side)
{
    const double key_sd = std::sqrt((key.array() - key.mean()).square().mean());
    const double cov = covariance(z, key);
    if (std::abs(cov) > 1e-10 * std::max(key_sd, 1e-300)) {
        if (cov < 0) z = -z;
        return;
    }
    warnings.push_back(std::string(side) + " scores uncorrelated with degree; sign fixed by first entry");
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (std::abs(z(i)) > 1e-8) {
            if (z(i) < 0) z = -z;
            return;
        }
    }
}

struct SecondEigen {
    Eigen::VectorXd vector;  // eigenvector of the row-stochastic transition, unnormalized
    double lambda2 = 0;
    double lambda3 = 0;
    Convergence info;
};

// Second eigenvector of T = D_a^{-1} M D_b^{-1} M^T, where D_a/D_b hold row/column sums of M.
// T is similar to the symmetric PSD matrix S = A A^T with A = D_a^{-1/2} M D_b^{-1/2}:
// if S u = lambda u then T (D_a^{-1/2} u) = lambda (D_a^{-1/2} u). S has top eigenvector
// sqrt(k_a) with eigenvalue 1.
SecondEigen second_eigenvector(const Eigen::MatrixXd& m, const Eigen::VectorXd& k_rows, const Eigen::VectorXd& k_cols,
                               const EciOptions& opt, const char* side)
{
    const Eigen::VectorXd inv_sqrt_rows = k_rows.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd a = inv_sqrt_rows.asDiagonal() * m * k_cols.cwiseSqrt().cwiseInverse().asDiagonal();
    const Eigen::Index n = m.rows();
    SecondEigen out;

    if (n <= opt.dense_limit) {
        const Eigen::MatrixXd s = a * a.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
        if (solver.info() != Eigen::Success) throw NumericError(std::string(side) + " eigendecomposition failed");
        const auto& evals = solver.eigenvalues();  // ascending
        const double l1 = evals(n - 1);
        out.lambda2 = evals(n - 2);
        out.lambda3 = n >= 3 ? evals(n - 3) : 0.0;
        if (l1 - out.lambda2 <= opt.degeneracy_tol * std::max(1.0, l1)) {
            throw DegenerateError(std::string(side) + " spectrum degenerate: leading eigenvalue " + format_double(l1) +
                                  " is repeated (disconnected network)");
        }
        if (n >= 3 && out.lambda2 - out.lambda3 <= opt.degeneracy_tol * std::max(1.0, l1)) {
            throw DegenerateError(std::string(side) + " spectrum degenerate: second eigenvalue " +
                                  format_double(out.lambda2) + " equals third " + format_double(out.lambda3) +
                                  "; second eigenvector not unique");
        }
        out.vector = inv_sqrt_rows.cwiseProduct(solver.eigenvectors().col(n - 2));
        out.info.solver = "dense-eigensolver";
        out.info.iterations = 1;
        out.info.residual = (s * solver.eigenvectors().col(n - 2) - out.lambda2 * solver.eigenvectors().col(n - 2)).norm();
        out.info.second_eigenvalue = out.lambda2;
        out.info.third_eigenvalue = out.lambda3;
        return out;
    }

    // Power iteration on S with the trivial eigenvector projected out.
    const Eigen::VectorXd top = k_rows.cwiseSqrt().normalized();
    Eigen::VectorXd x(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        x(r) = std::sqrt(k_rows(r)) * (k_rows(r) + 1.0 / static_cast<double>(r + 2));
    }
    x -= top.dot(x) * top;
    if (!(x.norm() > 0)) throw DegenerateError(std::string(side) + " power iteration start vector vanished");
    x.normalize();
    double lambda = 0;
    double residual = 0;
    int it = 0;
    bool converged = false;
    for (it = 1; it <= opt.power_max_iter; ++it) {
        Eigen::VectorXd y = a * (a.transpose() * x);
        y -= top.dot(y) * top;
        lambda = x.dot(y);
        const double norm = y.norm();
        if (!(norm > 0) || !std::isfinite(norm)) {
            throw DegenerateError(std::string(side) + " second eigenvalue is zero; second eigenvector not unique");
        }
        y /= norm;
        residual = (y - x).norm();
        x = std::move(y);
        if (residual < opt.power_tol) {
            converged = true;
            break;
        }
    }
    if (lambda >= 1.0 - opt.degeneracy_tol) {
        throw DegenerateError(std::string(side) + " spectrum degenerate: leading eigenvalue repeated (disconnected network)");
    }
    out.vector = inv_sqrt_rows.cwiseProduct(x);
    out.lambda2 = lambda;
    out.lambda3 = std::numeric_limits<double>::quiet_NaN();
    out.info.solver = "power-iteration";
    out.info.iterations = std::min(it, opt.power_max_iter);
    out.info.residual = residual;
    out.info.converged = converged;
    out.info.second_eigenvalue = lambda;
    out.info.third_eigenvalue = out.lambda3;
    return out;
}

}  // namespace

ComplexityScores eci(const Eigen::MatrixXd& m, const EciOptions& options)
{
    if (m.rows() < 2) throw DegenerateError("ECI needs at least 2 regions, got " + std::to_string(m.rows()));
    if (m.cols() < 2) throw DegenerateError("ECI needs at least 2 industries, got " + std::to_string(m.cols()));
    const auto d = degrees(m);

    ComplexityScores out;
    out.kind = IndexKind::ECI;

    auto region = second_eigenvector(m, d.diversity, d.ubiquity, options, "region");
    auto industry = second_eigenvector(m.transpose(), d.ubiquity, d.diversity, options, "industry");

    out.region_scores = standardize(region.vector);
    orient(out.region_scores, d.diversity, out.warnings, "region");
    out.industry_scores = standardize(industry.vector);
    orient(out.industry_scores, -d.ubiquity, out.warnings, "industry");

    out.convergence = region.info;
    out.convergence.converged = region.info.converged && industry.info.converged;
    out.convergence.iterations = std::max(region.info.iterations, industry.info.iterations);
    out.convergence.residual = std::max(region.info.residual, industry.info.residual);
    if (!out.convergence.converged) out.warnings.push_back("power iteration hit its iteration cap");
    return out;
}

namespace {

void attach(ComplexityScores& s, const InputMatrix& m)
{
    s.strategy = m.strategy;
    s.regions = m.regions;
    s.industries = m.industries;
}

}  // namespace

ComplexityScores eci(const InputMatrix& m, const EciOptions& options)
{
    auto s = eci(m.values, options);
    attach(s, m);
    return s;
}

ComplexityScores fitness(const Eigen::MatrixXd& m, const FitnessOptions& options)
{
    if (options.max_iter < 1) throw ConfigError("fitness needs max_iter >= 1");
    if (!(options.tol > 0)) throw ConfigError("fitness needs tol > 0");
    degrees(m);

    const Eigen::Index nr = m.rows();
    const Eigen::Index ni = m.cols();
    Eigen::VectorXd f = Eigen::VectorXd::Ones(nr);
    Eigen::VectorXd q = Eigen::VectorXd::Ones(ni);

    ComplexityScores out;
    out.kind = IndexKind::FI;
    out.convergence.solver = "fixed-point";
    out.convergence.converged = false;

    for (int n = 1; n <= options.max_iter; ++n) {
        Eigen::VectorXd f_next = m * q;
        Eigen::VectorXd q_next = (m.transpose() * f.cwiseInverse()).cwiseInverse();
        f_next /= f_next.mean();
        q_next /= q_next.mean();
        if (f_next.hasNaN() || q_next.hasNaN()) {
            throw NumericError("fitness iteration " + std::to_string(n) + " produced NaN");
        }
        // On matrices that are not nested some fitnesses decay geometrically towards zero.
        // Once a value would leave the normal double range the map cannot continue; keep the
        // last representable iterate and report non-convergence.
        const double floor = std::numeric_limits<double>::min();
        if (!f_next.allFinite() || !q_next.allFinite() || (f_next.array() < floor).any() || (q_next.array() < floor).any()) {
            out.warnings.push_back("fitness values left the representable range at iteration " + std::to_string(n) +
                                   "; some fitnesses tend to zero, stopped at iteration " + std::to_string(n - 1));
            break;
        }
        const double change = std::max(((f_next - f).array().abs() / f.array()).maxCoeff(),
                                       ((q_next - q).array().abs() / q.array()).maxCoeff());
        out.convergence.max_mean_deviation = std::max(
            {out.convergence.max_mean_deviation, std::abs(f_next.mean() - 1.0), std::abs(q_next.mean() - 1.0)});
        f = std::move(f_next);
        q = std::move(q_next);
        out.convergence.iterations = n;
        out.convergence.residual = change;
        if (change < options.tol) {
            out.convergence.converged = true;
            break;
        }
    }
    if (!out.convergence.converged) {
        out.warnings.push_back("fitness did not converge within " + std::to_string(options.max_iter) +
                               " iterations (last relative change " + format_double(out.convergence.residual) + ")");
    }
    out.region_scores = std::move(f);
    out.industry_scores = std::move(q);
    return out;
}

ComplexityScores fitness(const InputMatrix& m, const FitnessOptions& options)
{
    auto s = fitness(m.values, options);
    attach(s, m);
    return s;
}

// ---------------------------------------------------------------------------
// export

std::string scores_csv(const ComplexityScores& s)
{
    std::string out = "side,code,score\n";
    auto emit = [&](const char* side, const Catalog& cat, const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            out += side;
            out += ',';
            out += cat.empty() ? std::to_string(i) : quote_field(cat.code(static_cast<std::size_t>(i)));
            out += ',';
            out += format_double(v(i));
            out += '\n';
        }
    };
    emit("region", s.regions, s.region_scores);
    emit("industry", s.industries, s.industry_scores);
    return out;
}

std::string scores_metadata_json(const ComplexityScores& s)
{
    nlohmann::ordered_json j;
    j["index"] = std::string(to_string(s.kind));
    j["strategy"] = s.strategy ? nlohmann::ordered_json(std::string(to_string(*s.strategy))) : nlohmann::ordered_json();
    j["year"] = s.year ? nlohmann::ordered_json(*s.year) : nlohmann::ordered_json();
    j["regions"] = s.region_scores.size();
    j["industries"] = s.industry_scores.size();
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json conv;
    conv["solver"] = s.convergence.solver;
    conv["converged"] = s.convergence.converged;
    conv["iterations"] = s.convergence.iterations;
    conv["residual"] = finite_or_null(s.convergence.residual);
    if (s.kind == IndexKind::ECI) {
        conv["second_eigenvalue"] = finite_or_null(s.convergence.second_eigenvalue);
        conv["third_eigenvalue"] = finite_or_null(s.convergence.third_eigenvalue);
        j["sign_convention"] = "region scores covary nonnegatively with diversity; industry scores with -ubiquity";
        j["standardization"] = "mean 0, population standard deviation 1";
        j["industry_side"] = "second eigenvector of the transposed (industry-industry) construction";
    } else {
        conv["max_mean_deviation"] = s.convergence.max_mean_deviation;
        j["normalization"] = "F and Q divided by their mean after every iteration";
    }
    j["convergence"] = conv;
    j["warnings"] = s.warnings;
    return j.dump(2) + "\n";
}

ComplexityScores parse_scores_csv(std::string_view text)
{
    auto table = parse_delimited(text, ',', true);
    const std::vector<std::string> expected = {"side", "code", "score"};
    if (table.header != expected) throw SchemaError("score file must have columns side,code,score");
    std::vector<std::string> rcodes;
    std::vector<std::string> icodes;
    std::vector<double> rvals;
    std::vector<double> ivals;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != 3) throw SchemaError("score line " + std::to_string(table.line_numbers[r]) + ": expected 3 fields");
        auto v = parse_double(row[2]);
        if (!v) throw SchemaError("score line " + std::to_string(table.line_numbers[r]) + ": bad score");
        if (row[0] == "region") {
            rcodes.push_back(row[1]);
            rvals.push_back(*v);
        } else if (row[0] == "industry") {
            icodes.push_back(row[1]);
            ivals.push_back(*v);
        } else {
            throw SchemaError("score line " + std::to_string(table.line_numbers[r]) + ": unknown side '" + row[0] + "'");
        }
    }
    ComplexityScores s;
    s.regions = Catalog(std::move(rcodes));
    s.industries = Catalog(std::move(icodes));
    s.region_scores = Eigen::Map<Eigen::VectorXd>(rvals.data(), static_cast<Eigen::Index>(rvals.size()));
    s.industry_scores = Eigen::Map<Eigen::VectorXd>(ivals.data(), static_cast<Eigen::Index>(ivals.size()));
    return s;
}

}  // namespace ecx
