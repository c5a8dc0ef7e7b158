// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "ecx/complexity.hpp"
#include "ecx/diagnostics.hpp"
#include "ecx/error.hpp"
#include "ecx/matrix.hpp"
#include "ecx/regress.hpp"
#include "ecx/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace ecx;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Eigen::MatrixXd random_pruned_binary(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double density)
{
    std::bernoulli_distribution bit(density);
    std::uniform_int_distribution<Eigen::Index> pick_col(0, cols - 1);
    std::uniform_int_distribution<Eigen::Index> pick_row(0, rows - 1);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = bit(rng) ? 1.0 : 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (m.row(r).sum() == 0) m(r, pick_col(rng)) = 1;
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
        if (m.col(c).sum() == 0) m(pick_row(rng), c) = 1;
    }
    return m;
}

// Ranks with values closer than `tol` (relative to the spread) treated as ties.
std::vector<double> tied_ranks(const Eigen::VectorXd& x, double tol)
{
    const auto n = static_cast<std::size_t>(x.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b)); });
    const double scale = std::max(x.maxCoeff() - x.minCoeff(), 1.0);
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && x(static_cast<Eigen::Index>(idx[j])) - x(static_cast<Eigen::Index>(idx[j - 1])) <= tol * scale) ++j;
        const double avg = 0.5 * static_cast<double>(i + j - 1);
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = avg;
        i = j;
    }
    return ranks;
}

bool same_ranking(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol = 1e-9)
{
    return tied_ranks(a, tol) == tied_ranks(b, tol);
}

// Solves A z = rhs by Gauss-Jordan with partial pivoting in long double.
Eigen::MatrixXd gauss_jordan(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs)
{
    const auto n = a.rows();
    const auto m = rhs.cols();
    std::vector<std::vector<long double>> w(static_cast<std::size_t>(n), std::vector<long double>(static_cast<std::size_t>(n + m)));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) w[i][j] = a(i, j);
        for (Eigen::Index j = 0; j < m; ++j) w[i][n + j] = rhs(i, j);
    }
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index piv = c;
        for (Eigen::Index r = c + 1; r < n; ++r) {
            if (std::fabs(w[r][c]) > std::fabs(w[piv][c])) piv = r;
        }
        std::swap(w[c], w[piv]);
        for (Eigen::Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const long double f = w[r][c] / w[c][c];
            for (Eigen::Index j = c; j < n + m; ++j) w[r][j] -= f * w[c][j];
        }
    }
    Eigen::MatrixXd out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) out(i, j) = static_cast<double>(w[i][n + j] / w[i][i]);
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome normalization()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<Eigen::Index> rows(5, 50), cols(5, 80);
    std::uniform_real_distribution<double> density(0.15, 0.6);
    double worst_mean = 0, worst_sd = 0, worst_fq = 0;
    int redraws = 0;
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXd m;
        ComplexityScores e;
        for (;;) {
            m = random_pruned_binary(rng, rows(rng), cols(rng), density(rng));
            try {
                e = eci(m);
                break;
            } catch (const DegenerateError&) {
                ++redraws;  // ECI undefined for this draw
            }
        }
        const auto& s = e.region_scores;
        const double mean = s.mean();
        const double sd = std::sqrt((s.array() - mean).square().mean());
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_sd = std::max(worst_sd, std::abs(sd - 1));
        const auto f = fitness(m);
        worst_fq = std::max(worst_fq, f.convergence.max_mean_deviation);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst_mean < 1e-9 && worst_sd <= 1e-9 && worst_fq <= 1e-9 && secs < 10;
    o.detail = "max |mean ECI| " + fmt("%.2e", worst_mean) + ", max |sd-1| " + fmt("%.2e", worst_sd) +
               ", max per-iteration |mean F or Q - 1| " + fmt("%.2e", worst_fq) + ", " + fmt("%.2f", secs) + " s" +
               (redraws ? ", " + std::to_string(redraws) + " degenerate draws replaced" : "");
    return o;
}

Outcome reflections()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2002);
    std::uniform_int_distribution<Eigen::Index> dim(4, 12);
    int mismatches = 0, redraws = 0;
    double worst_rho = 1;
    double slowest = 0;  // (lambda3 / lambda2)^10 among mismatched draws
    for (int t = 0; t < 50; ++t) {
        Eigen::MatrixXd m;
        ComplexityScores e;
        for (;;) {
            m = random_pruned_binary(rng, dim(rng), dim(rng), 0.5);
            try {
                e = eci(m);
                break;
            } catch (const DegenerateError&) {
                ++redraws;
            }
        }
        const auto trace = method_of_reflections(m, 20);
        Eigen::VectorXd k = standardize(trace.region[20]);
        // Same sign convention as ECI: nonnegative covariance with diversity.
        const Eigen::VectorXd div = m.rowwise().sum();
        if ((k.array() * (div.array() - div.mean())).sum() < 0) k = -k;
        if (!same_ranking(k, e.region_scores)) {
            ++mismatches;
            slowest = std::max(slowest, std::pow(e.convergence.third_eigenvalue / e.convergence.second_eigenvalue, 10));
        }
        std::vector<double> ka(k.data(), k.data() + k.size()), ea(e.region_scores.data(), e.region_scores.data() + e.region_scores.size());
        try {
            worst_rho = std::min(worst_rho, correlate(ka, ea, Transform::none, CorrelationKind::spearman));
        } catch (const Error&) {
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = mismatches == 0 && secs < 5;
    o.detail = std::to_string(50 - mismatches) + "/50 identical rankings, min Spearman " + fmt("%.6f", worst_rho) +
               (mismatches ? ", largest (lambda3/lambda2)^10 among mismatches " + fmt("%.3g", slowest) : "") + ", " +
               fmt("%.2f", secs) + " s" + (redraws ? ", " + std::to_string(redraws) + " degenerate draws replaced" : "");
    return o;
}

Outcome nestedness()
{
    int failures = 0;
    std::string first;
    for (Eigen::Index n = 3; n <= 30; ++n) {
        const auto m = generate_nested(n, n);
        const Eigen::VectorXd div = m.rowwise().sum();
        const auto e = eci(m);
        const auto f = fitness(m);
        const auto view = order_for_triangularity(InputMatrix::from_values(m, Strategy::BM));
        bool triangular = is_lower_triangular_staircase(view.values);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) triangular = triangular && ((view.values(r, c) != 0) == (c <= r));
        }
        const bool ok = same_ranking(e.region_scores, div, 0) && same_ranking(f.region_scores, div, 0) && triangular;
        if (!ok) {
            ++failures;
            if (first.empty()) first = ", first failure n=" + std::to_string(n);
        }
    }
    Outcome o;
    o.pass = failures == 0;
    o.detail = std::to_string(28 - failures) + "/28 sizes with ECI, FI and diversity rankings equal and triangular order" + first;
    return o;
}

Outcome containment()
{
    std::mt19937_64 rng(4004);
    std::uniform_int_distribution<Eigen::Index> dim(2, 40);
    std::uniform_int_distribution<int> size(0, 3), small(0, 60), large(0, 50000);
    int bad = 0;
    double worst_wm = 0;
    for (int t = 0; t < 1000; ++t) {
        Eigen::MatrixXd x(dim(rng), dim(rng));
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const int s = size(rng);
            x(k) = s == 0 ? 0 : s == 3 ? large(rng) : small(rng);
        }
        x(0, 0) += 1;
        const auto bm = strategy_values(x, Strategy::BM, {});
        const auto rlq = strategy_values(x, Strategy::RLQ, {});
        const auto wm = strategy_values(x, Strategy::WM, {});
        const auto pr = strategy_values(x, Strategy::Presence, {});
        const auto cm = strategy_values(x, Strategy::CM, {});
        const bool ok = (pr.array() >= cm.array()).all() && (cm.array() >= bm.array()).all() &&
                        bm == (rlq.array() >= 1.0).cast<double>().matrix();
        if (!ok) ++bad;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (x.col(c).sum() > 0) worst_wm = std::max(worst_wm, std::abs(wm.col(c).sum() - 1));
        }
    }
    Outcome o;
    o.pass = bad == 0 && worst_wm <= 1e-12;
    o.detail = std::to_string(1000 - bad) + "/1000 matrices with Presence >= CM >= BM and BM = [RLQ >= 1], max |WM column sum - 1| " +
               fmt("%.2e", worst_wm);
    return o;
}

Outcome gas_station()
{
    // New York row and gas-station column: X = 13,972; New York holds 1% of its jobs in the
    // industry while the industry is 1/27 of national employment, so LQ = 0.01 * 27 = 0.27.
    Eigen::MatrixXd x(2, 2);
    x << 13972, 1383228, 86028, 1216772;
    const double lq = location_quotient(x)(0, 0);
    const double bm = strategy_values(x, Strategy::BM, {})(0, 0);
    const double cm = strategy_values(x, Strategy::CM, {})(0, 0);
    const double pr = strategy_values(x, Strategy::Presence, {})(0, 0);
    Outcome o;
    o.pass = std::abs(lq - 0.27) < 1e-12 && bm == 0 && cm == 1 && pr == 1;
    o.detail = "LQ " + fmt("%.4f", lq) + ", BM " + fmt("%.0f", bm) + ", CM " + fmt("%.0f", cm) + ", Presence " + fmt("%.0f", pr);
    return o;
}

Outcome ols_oracle()
{
    std::mt19937_64 rng(6006);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> coef(1, 3);
    const int n = 30, k = 4;
    double worst_b = 0, worst_se = 0;
    for (int t = 0; t < 200; ++t) {
        Eigen::MatrixXd x(n, k);
        Eigen::VectorXd y(n);
        x.col(k - 1).setOnes();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j + 1 < k; ++j) x(i, j) = g(rng);
        }
        Eigen::VectorXd beta(k);
        for (Eigen::Index j = 0; j < k; ++j) beta(j) = (coef(rng)) * (j % 2 ? -1 : 1);
        for (Eigen::Index i = 0; i < n; ++i) y(i) = x.row(i).dot(beta) + 0.5 * (1 + std::abs(x(i, 0))) * g(rng);

        const auto fit = ols(y, x, {"a", "b", "c", "Constant"}, SeKind::hc1, true);

        const Eigen::MatrixXd xtx = x.transpose() * x;
        const Eigen::VectorXd b = gauss_jordan(xtx, x.transpose() * y);
        const Eigen::MatrixXd inv = gauss_jordan(xtx, Eigen::MatrixXd::Identity(k, k));
        const Eigen::VectorXd e = y - x * b;
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < n; ++i) meat += e(i) * e(i) * x.row(i).transpose() * x.row(i);
        const Eigen::MatrixXd cov = static_cast<double>(n) / (n - k) * inv * meat * inv;
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& term = fit.terms[static_cast<std::size_t>(j)];
            worst_b = std::max(worst_b, std::abs(term.coef - b(j)) / std::abs(b(j)));
            const double se = std::sqrt(cov(j, j));
            worst_se = std::max(worst_se, std::abs(term.se - se) / se);
        }
    }
    Outcome o;
    o.pass = worst_b <= 1e-10 && worst_se <= 1e-10;
    o.detail = "max relative coefficient error " + fmt("%.2e", worst_b) + ", max relative HC1 SE error " + fmt("%.2e", worst_se);
    return o;
}

Outcome within_equivalence()
{
    std::mt19937_64 rng(7007);
    std::normal_distribution<double> g;
    const int entities = 20, years = 5, n = entities * years, k = 2;
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> alpha(entities), gamma(years);
        for (auto& a : alpha) a = 3 * g(rng);
        for (auto& c : gamma) c = 2 * g(rng);
        Eigen::MatrixXd x(n, k);
        Eigen::VectorXd y(n);
        std::vector<std::size_t> ent(n), per(n);
        for (int i = 0; i < entities; ++i) {
            for (int s = 0; s < years; ++s) {
                const int row = i * years + s;
                ent[row] = static_cast<std::size_t>(i);
                per[row] = static_cast<std::size_t>(s);
                x(row, 0) = alpha[i] + g(rng);
                x(row, 1) = gamma[s] + g(rng);
                y(row) = 1.5 * x(row, 0) - 0.7 * x(row, 1) + alpha[i] + gamma[s] + g(rng);
            }
        }
        const auto fit = lsdv(y, x, {"x1", "x2"}, ent, per);

        // Two-way demeaning of a balanced panel.
        auto demean = [&](const Eigen::VectorXd& v) {
            std::vector<double> em(entities, 0), pm(years, 0);
            const double all = v.mean();
            for (int row = 0; row < n; ++row) {
                em[ent[row]] += v(row) / years;
                pm[per[row]] += v(row) / entities;
            }
            Eigen::VectorXd out(n);
            for (int row = 0; row < n; ++row) out(row) = v(row) - em[ent[row]] - pm[per[row]] + all;
            return out;
        };
        Eigen::MatrixXd xd(n, k);
        for (Eigen::Index j = 0; j < k; ++j) xd.col(j) = demean(x.col(j));
        const Eigen::VectorXd yd = demean(y);
        const Eigen::VectorXd b = gauss_jordan(xd.transpose() * xd, xd.transpose() * yd);
        for (Eigen::Index j = 0; j < k; ++j) worst = std::max(worst, std::abs(fit.terms[static_cast<std::size_t>(j)].coef - b(j)));
    }
    Outcome o;
    o.pass = worst <= 1e-8;
    o.detail = "max |LSDV slope - within slope| " + fmt("%.2e", worst);
    return o;
}

Outcome capability_recovery()
{
    double total = 0;
    double lo = 1;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto inst = generate_capability_model(200, 100, 20, 0.5, 0.1, seed);
        auto [pruned, report] = prune_empty(InputMatrix::from_values(inst.presence));
        const auto e = eci(pruned);
        const auto all = InputMatrix::from_values(inst.presence);
        const Eigen::VectorXd counts = inst.model.capability_counts();
        std::vector<double> a, b;
        for (std::size_t r = 0; r < pruned.regions.size(); ++r) {
            const auto row = *all.regions.find(pruned.regions.code(r));
            a.push_back(e.region_scores(static_cast<Eigen::Index>(r)));
            b.push_back(counts(static_cast<Eigen::Index>(row)));
        }
        const double rho = correlate(a, b, Transform::none, CorrelationKind::spearman);
        total += rho;
        lo = std::min(lo, rho);
    }
    const double mean = total / 20;
    Outcome o;
    o.pass = mean > 0.5;
    o.detail = "mean Spearman(ECI, capability count) " + fmt("%.4f", mean) + " over 20 seeds, min " + fmt("%.4f", lo) +
               " (200x100, 20 capabilities, p_region 0.5, p_industry 0.1)";
    return o;
}

}  // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"ECI and FI normalization", normalization},
        {"eigenvector ECI vs reflections k_r,20 rank agreement", reflections},
        {"nested matrices: ECI, FI, diversity rankings and triangular order", nestedness},
        {"input-matrix containment", containment},
        {"gas-station cell: BM 0, CM 1, Presence 1", gas_station},
        {"OLS coefficients and HC1 errors vs direct formulas", ols_oracle},
        {"LSDV vs two-way within estimator", within_equivalence},
        {"capability recovery by ECI", capability_recovery},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %zu: %s  %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].name, o.detail.c_str());
    }
    std::printf("criterion 9: SKIPPED  full reproduction on 2007-2015 CBP data (needs user-supplied data files)\n");
    std::printf("%d of %zu runnable criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    std::fflush(stdout);
    return failed == 0 ? 0 : 1;
}
