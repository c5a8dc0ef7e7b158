#include "ecx/error.hpp"
#include "ecx/regress.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace ecx;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x)
{
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out << x, Eigen::VectorXd::Ones(x.rows());
    return out;
}

std::vector<std::string> names(Eigen::Index k)
{
    std::vector<std::string> n;
    for (Eigen::Index j = 0; j + 1 < k; ++j) n.push_back("x" + std::to_string(j));
    n.emplace_back("Constant");
    return n;
}

// Independent estimator: normal equations through an explicit inverse.
struct Oracle {
    Eigen::VectorXd beta;
    Eigen::MatrixXd hc1;
    Eigen::MatrixXd classical;
};

Oracle oracle_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x)
{
    const double n = static_cast<double>(x.rows()), k = static_cast<double>(x.cols());
    const Eigen::MatrixXd inv = (x.transpose() * x).inverse();
    Oracle o;
    o.beta = inv * (x.transpose() * y);
    const Eigen::VectorXd e = y - x * o.beta;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) meat += e(i) * e(i) * x.row(i).transpose() * x.row(i);
    o.hc1 = n / (n - k) * inv * meat * inv;
    o.classical = e.squaredNorm() / (n - k) * inv;
    return o;
}

double rel(double a, double b)
{
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

Dataset cross_section_data(std::mt19937_64& rng, int n, int year)
{
    std::normal_distribution<double> g;
    Dataset d;
    std::vector<std::string> controls = {"Unemployment", "ManuShare", "Patent", "Population", "MedianAge",
                                         "Education", "BlackShare", "Foreign", "UnionCoverage", "MinimumWage", "Vote"};
    for (int i = 0; i < n; ++i) d.add_row("e" + std::to_string(i), year);
    std::vector<double> eci(static_cast<std::size_t>(n)), income(static_cast<std::size_t>(n));
    std::map<std::string, std::vector<double>> cols;
    for (const auto& c : controls) cols[c].resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        eci[i] = g(rng);
        double y = 40000 + 2000 * eci[i];
        for (std::size_t c = 0; c < controls.size(); ++c) {
            const double v = g(rng);
            cols[controls[c]][i] = v;
            y += 300.0 * static_cast<double>(c + 1) * v;
        }
        income[i] = y + 1500 * g(rng);
    }
    d.add_column("ECI", eci);
    d.add_column("Income", income);
    for (auto& [name, v] : cols) d.add_column(name, v);
    return d;
}

}  // namespace

TEST_CASE("stars")
{
    CHECK(stars(0.0099) == "***");
    CHECK(stars(0.01) == "**");
    CHECK(stars(0.0499) == "**");
    CHECK(stars(0.05) == "*");
    CHECK(stars(0.0999) == "*");
    CHECK(stars(0.1) == "");
}

TEST_CASE("exact fit")
{
    Eigen::MatrixXd x(10, 1);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
        x(i, 0) = i;
        y(i) = 2 * i + 3;
    }
    auto r = ols(y, with_intercept(x), names(2));
    CHECK(r.terms[0].coef == doctest::Approx(2).epsilon(1e-12));
    CHECK(r.terms[1].coef == doctest::Approx(3).epsilon(1e-12));
    CHECK(r.r2 == doctest::Approx(1).epsilon(1e-12));
    CHECK(r.resid_se < 1e-12);
}

TEST_CASE("coefficients and covariances match the normal-equations oracle")
{
    std::mt19937_64 rng(83);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXd raw(20, 2);
        for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) = g(rng);
        const auto x = with_intercept(raw);
        Eigen::VectorXd y(20);
        for (int i = 0; i < 20; ++i) y(i) = 1 + 0.5 * raw(i, 0) - raw(i, 1) + (0.2 + std::abs(raw(i, 0))) * g(rng);
        const auto o = oracle_fit(y, x);
        const auto hc1 = ols(y, x, names(3), SeKind::hc1);
        const auto cl = ols(y, x, names(3), SeKind::classical);
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(rel(hc1.terms[static_cast<std::size_t>(j)].coef, o.beta(j)) < 1e-10);
            CHECK(rel(hc1.terms[static_cast<std::size_t>(j)].se, std::sqrt(o.hc1(j, j))) < 1e-10);
            CHECK(rel(cl.terms[static_cast<std::size_t>(j)].se, std::sqrt(o.classical(j, j))) < 1e-10);
        }
        CHECK((hc1.covariance - o.hc1).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(hc1.r2 >= 0);
        CHECK(hc1.r2 <= 1);
        CHECK(hc1.n_obs == 20);
    }
}

TEST_CASE("HC1 equals classical when residuals have constant magnitude")
{
    Eigen::MatrixXd raw(8, 1);
    Eigen::VectorXd e(8);
    raw << 1, 2, 3, 4, 5, 6, 7, 8;
    e << 1, -1, -1, 1, 1, -1, -1, 1;  // orthogonal to the constant and to x
    const auto x = with_intercept(raw);
    const Eigen::VectorXd y = x * Eigen::Vector2d(0.7, -2) + 0.3 * e;
    const auto a = ols(y, x, names(2), SeKind::hc1);
    const auto b = ols(y, x, names(2), SeKind::classical);
    CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("t statistics, p-values and F")
{
    std::mt19937_64 rng(89);
    std::normal_distribution<double> g;
    Eigen::MatrixXd raw(40, 2);
    for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) = g(rng);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y(i) = 0.8 * raw(i, 0) + g(rng);
    const auto r = ols(y, with_intercept(raw), names(3), SeKind::classical);
    const auto& t0 = r.terms[0];
    CHECK(t0.t == doctest::Approx(t0.coef / t0.se));
    CHECK(t0.p < 0.01);
    CHECK(r.terms[1].p > 0.0);
    CHECK(r.f_df1 == 2);
    CHECK(r.f_df2 == 37);
    // Classical F from R^2.
    CHECK(r.f_stat == doctest::Approx((r.r2 / 2) / ((1 - r.r2) / 37)).epsilon(1e-10));
    CHECK(r.adj_r2 == doctest::Approx(1 - (1 - r.r2) * 39.0 / 37.0).epsilon(1e-12));
}

TEST_CASE("rank deficiency names the collinear column; n <= k is rejected")
{
    Eigen::MatrixXd raw(6, 2);
    raw << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
    Eigen::VectorXd y(6);
    y << 1, 3, 2, 5, 4, 6;
    CHECK_THROWS_WITH_AS(ols(y, with_intercept(raw), {"a", "b", "Constant"}), doctest::Contains("collinear"), NumericError);
    CHECK_THROWS_AS(ols(y.head(3), with_intercept(raw.topRows(3)), {"a", "b", "Constant"}), ConfigError);
}

TEST_CASE("shifting a regressor only moves the intercept")
{
    std::mt19937_64 rng(97);
    std::normal_distribution<double> g;
    Eigen::MatrixXd raw(25, 3);
    for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) = g(rng);
    Eigen::VectorXd y(25);
    for (int i = 0; i < 25; ++i) y(i) = raw.row(i).sum() + g(rng);
    auto a = ols(y, with_intercept(raw), names(4));
    raw.col(1).array() += 1000;
    auto b = ols(y, with_intercept(raw), names(4));
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(a.terms[j].coef - b.terms[j].coef) < 1e-9);
    CHECK(std::abs(a.terms[3].coef - b.terms[3].coef) > 1);
}

TEST_CASE("LSDV slopes equal two-way demeaned slopes on a balanced panel")
{
    std::mt19937_64 rng(101);
    std::normal_distribution<double> g;
    const int ne = 8, nt = 4, n = ne * nt;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    std::vector<std::size_t> ent, per;
    for (int e = 0; e < ne; ++e) {
        const double a = 3 * g(rng);
        for (int t = 0; t < nt; ++t) {
            const int i = e * nt + t;
            x(i, 0) = g(rng) + a;
            x(i, 1) = g(rng);
            y(i) = a + 0.5 * t + 1.5 * x(i, 0) - x(i, 1) + 0.3 * g(rng);
            ent.push_back(static_cast<std::size_t>(e));
            per.push_back(static_cast<std::size_t>(2000 + t));
        }
    }
    auto demean = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd em = Eigen::VectorXd::Zero(ne), tm = Eigen::VectorXd::Zero(nt);
        for (int i = 0; i < n; ++i) {
            em(i / nt) += v(i) / nt;
            tm(i % nt) += v(i) / ne;
        }
        Eigen::VectorXd out(n);
        for (int i = 0; i < n; ++i) out(i) = v(i) - em(i / nt) - tm(i % nt) + v.mean();
        return out;
    };
    Eigen::MatrixXd xd(n, 2);
    xd.col(0) = demean(x.col(0));
    xd.col(1) = demean(x.col(1));
    const Eigen::VectorXd yd = demean(y);
    const Eigen::VectorXd within = (xd.transpose() * xd).ldlt().solve(xd.transpose() * yd);
    const auto r = lsdv(y, x, {"a", "b"}, ent, per);
    REQUIRE(r.terms.size() == 2);
    CHECK(std::abs(r.terms[0].coef - within(0)) < 1e-8);
    CHECK(std::abs(r.terms[1].coef - within(1)) < 1e-8);
    CHECK(r.r2_kind == "within");
    const Eigen::VectorXd resid = yd - xd * within;
    CHECK(r.r2 == doctest::Approx(1 - resid.squaredNorm() / yd.squaredNorm()).epsilon(1e-9));
    const double p = 2 + 1 + (ne - 1) + (nt - 1);
    CHECK(r.adj_r2 == doctest::Approx(1 - (1 - r.r2) * (n - 1) / (n - p)).epsilon(1e-9));
    CHECK(r.f_df1 == 2);
    CHECK(r.f_df2 == static_cast<int>(n - p));
}

TEST_CASE("LSDV drops a regressor absorbed by the dummies")
{
    std::mt19937_64 rng(103);
    std::normal_distribution<double> g;
    const int ne = 5, nt = 3, n = ne * nt;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    std::vector<std::size_t> ent, per;
    for (int i = 0; i < n; ++i) {
        ent.push_back(static_cast<std::size_t>(i / nt));
        per.push_back(static_cast<std::size_t>(i % nt));
        x(i, 0) = g(rng);
        x(i, 1) = 10.0 * (i / nt);  // constant within entity
        y(i) = x(i, 0) + g(rng);
    }
    auto r = lsdv(y, x, {"varies", "fixed"}, ent, per);
    CHECK(r.terms.size() == 1);
    CHECK(r.dropped_terms == std::vector<std::string>{"fixed"});
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("dataset loading")
{
    testing::TempDir dir("data");
    auto p = dir.write("d.csv", "entity,year,ECI,Income\na,2007,0.5,100\na,2008,NA,110\nb,2007,,90\n");
    auto d = Dataset::load(p);
    CHECK(d.size() == 3);
    CHECK(d.column("ECI")[0] == 0.5);
    CHECK(std::isnan(d.column("ECI")[1]));
    CHECK(std::isnan(d.column("ECI")[2]));
    CHECK(d.find("b", 2007) == 2u);
    CHECK_THROWS_AS(Dataset::load(dir.write("dup.csv", "entity,year,x\na,1,1\na,1,2\n")), SchemaError);
    CHECK_THROWS_AS(Dataset::load(dir.write("bad.csv", "entity,year,x\na,1,abc\n")), SchemaError);
}

TEST_CASE("cross-section ladder")
{
    std::mt19937_64 rng(107);
    auto d = cross_section_data(rng, 150, 2007);
    ModelSpec spec;
    spec.kind = ModelKind::cross_section;
    spec.outcome = "Income";
    spec.year = 2007;
    auto income = d.column("Income");
    auto eci = d.column("ECI");
    eci[3] = kNaN;
    d.add_column("ECI", eci);
    auto vote = d.column("Vote");
    vote[10] = kNaN;
    d.add_column("Vote", vote);

    auto res = run_cross_section(d, spec);
    REQUIRE(res.columns.size() == 5);
    const std::vector<std::size_t> sizes = {2, 5, 7, 5, 13};
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK(res.columns[c].label == "(" + std::to_string(c + 1) + ")");
        CHECK(res.columns[c].terms.size() == sizes[c]);
        CHECK(res.columns[c].terms.front().name == "ECI");
        CHECK(res.columns[c].terms.back().name == "Constant");
        CHECK(res.columns[c].n_obs + res.columns[c].n_deleted == 150);
    }
    CHECK(res.columns[0].n_deleted == 1);
    CHECK(res.columns[3].n_deleted == 2);
    CHECK(res.columns[4].n_deleted == 2);
    // Outcome in thousands: the ECI slope is near 2 (true 2000 USD).
    CHECK(res.columns[4].term("ECI")->coef == doctest::Approx(2.0).epsilon(0.25));

    const auto table = format_table(res, "Income per capita");
    CHECK(table.find("(5)") != std::string::npos);
    CHECK(table.find("*p<0.1; **p<0.05; ***p<0.01") != std::string::npos);
    CHECK(table.find("Observations") != std::string::npos);
    CHECK(table.find("F Statistic") != std::string::npos);
    CHECK(results_csv(res).find("(5),ECI,") != std::string::npos);

    spec.outcome = "Missing";
    CHECK_THROWS_WITH_AS(run_cross_section(d, spec), doctest::Contains("Missing"), ConfigError);
    spec.outcome = "Income";
    spec.year = 1999;
    CHECK_THROWS_AS(run_cross_section(d, spec), ConfigError);
}

TEST_CASE("simulated coefficients are recovered within two standard errors")
{
    std::mt19937_64 rng(109);
    int inside = 0, total = 0;
    for (int rep = 0; rep < 40; ++rep) {
        auto d = cross_section_data(rng, 120, 2010);
        ModelSpec spec;
        spec.kind = ModelKind::cross_section;
        spec.outcome = "Income";
        spec.year = 2010;
        const auto col = run_cross_section(d, spec).columns[4];
        const std::vector<std::pair<std::string, double>> truth = {
            {"ECI", 2.0}, {"Unemployment", 0.3}, {"MedianAge", 1.5}, {"Vote", 3.3}};
        for (const auto& [name, b] : truth) {
            const auto* t = col.term(name);
            ++total;
            if (std::abs(t->coef - b) <= 2 * t->se) ++inside;
        }
    }
    // Nominal coverage is 95%.
    CHECK(static_cast<double>(inside) / total > 0.88);
}

TEST_CASE("constant outcome gives zero slopes and R2 0")
{
    std::mt19937_64 rng(113);
    auto d = cross_section_data(rng, 50, 2007);
    d.add_column("Income", std::vector<double>(50, 5000));
    ModelSpec spec;
    spec.kind = ModelKind::cross_section;
    spec.outcome = "Income";
    spec.year = 2007;
    for (const auto& col : run_cross_section(d, spec).columns) {
        CHECK(col.r2 == 0);
        for (const auto& t : col.terms) {
            if (t.name != "Constant") CHECK(std::abs(t.coef) < 1e-10);
        }
    }
}

TEST_CASE("a control equal to the outcome is left out with a warning")
{
    std::mt19937_64 rng(127);
    auto d = cross_section_data(rng, 60, 2007);
    ModelSpec spec;
    spec.kind = ModelKind::cross_section;
    spec.outcome = "Population";
    spec.year = 2007;
    auto res = run_cross_section(d, spec);
    CHECK_FALSE(res.warnings.empty());
    CHECK(res.columns[2].term("Population") == nullptr);
}

TEST_CASE("period growth on a hand-solvable dataset")
{
    // Six entities; growth = 0.1 - 0.02 * ECI exactly, start level unrelated.
    Dataset d;
    const std::vector<double> eci = {-1, 0, 1, 2, -2, 0.5};
    const std::vector<double> start = {100, 200, 150, 120, 180, 160};
    for (int i = 0; i < 6; ++i) {
        d.add_row("e" + std::to_string(i), 2007);
        d.add_row("e" + std::to_string(i), 2009);
    }
    d.add_row("lonely", 2007);
    std::vector<double> eci_col(d.size(), kNaN), income(d.size(), kNaN);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto s = *d.find("e" + std::to_string(i), 2007);
        const auto t = *d.find("e" + std::to_string(i), 2009);
        eci_col[s] = eci[i];
        income[s] = start[i];
        income[t] = start[i] * (1 + 0.1 - 0.02 * eci[i]);
    }
    eci_col[*d.find("lonely", 2007)] = 1;
    income[*d.find("lonely", 2007)] = 50;
    d.add_column("ECI", eci_col);
    d.add_column("Income", income);

    ModelSpec spec;
    spec.kind = ModelKind::period_growth;
    spec.outcome = "Income";
    spec.start_year = 2007;
    spec.end_year = 2009;
    spec.controls = {{}, {}, {}};
    auto res = run_period_growth(d, spec);
    const auto& c1 = res.columns[0];
    CHECK(c1.n_obs == 6);
    CHECK(c1.n_deleted == 1);
    CHECK(c1.term("ECI")->coef == doctest::Approx(-0.02).epsilon(1e-9));
    CHECK(std::abs(c1.term("Income in 2007")->coef) < 1e-12);
    CHECK(c1.term("Constant")->coef == doctest::Approx(0.1).epsilon(1e-9));
    CHECK_FALSE(res.warnings.empty());

    // Zero growth everywhere: every coefficient is zero.
    for (std::size_t i = 0; i < 6; ++i) income[*d.find("e" + std::to_string(i), 2009)] = start[i];
    d.add_column("Income", income);
    for (const auto& t : run_period_growth(d, spec).columns[0].terms) CHECK(std::abs(t.coef) < 1e-12);

    spec.end_year = 2007;
    CHECK_THROWS_AS(run_period_growth(d, spec), ConfigError);
}

TEST_CASE("panel: outcome built from entity and year effects leaves nothing for lagged ECI")
{
    Dataset d;
    const std::vector<double> alpha = {10, 20, 35};
    const std::vector<double> gamma = {0, 1, 3, 4};
    std::mt19937_64 rng(131);
    std::normal_distribution<double> g;
    std::vector<double> eci, income;
    for (int e = 0; e < 3; ++e) {
        for (int t = 0; t < 4; ++t) {
            d.add_row("e" + std::to_string(e), 2007 + t);
            eci.push_back(g(rng));
            income.push_back(1000 * (alpha[static_cast<std::size_t>(e)] + gamma[static_cast<std::size_t>(t)]));
        }
    }
    d.add_row("single", 2010);
    eci.push_back(0.1);
    income.push_back(1000);
    d.add_column("ECI", eci);
    d.add_column("Income", income);
    ModelSpec spec;
    spec.kind = ModelKind::panel_lsdv;
    spec.outcome = "Income";
    spec.controls = {{}, {}, {}};
    auto res = run_panel_lsdv(d, spec);
    const auto& c1 = res.columns[0];
    REQUIRE(c1.terms.size() == 1);
    CHECK(c1.terms[0].name == "l.ECI");
    CHECK(std::abs(c1.terms[0].coef) < 1e-9);
    CHECK(c1.r2 == 0);
    CHECK(c1.n_obs == 9);  // first year of each entity has no lag; the singleton is dropped
    CHECK(c1.n_obs + c1.n_deleted == 13);
}

TEST_CASE("panel lag uses the previous year's key regressor")
{
    std::mt19937_64 rng(137);
    std::normal_distribution<double> g;
    Dataset d;
    std::vector<double> eci, income;
    for (int e = 0; e < 15; ++e) {
        for (int t = 0; t < 5; ++t) {
            d.add_row("e" + std::to_string(e), 2008 + t);
            eci.push_back(g(rng));
        }
    }
    for (int e = 0; e < 15; ++e) {
        for (int t = 0; t < 5; ++t) {
            const double lag = t > 0 ? eci[static_cast<std::size_t>(e * 5 + t - 1)] : 0;
            income.push_back(1000 * (e + 0.5 * t - 2.0 * lag + 0.01 * g(rng)));
        }
    }
    d.add_column("ECI", eci);
    d.add_column("Income", income);
    ModelSpec spec;
    spec.kind = ModelKind::panel_lsdv;
    spec.outcome = "Income";
    spec.controls = {{}, {}, {}};
    auto res = run_panel_lsdv(d, spec);
    CHECK(res.columns[0].terms[0].coef == doctest::Approx(-2.0).epsilon(0.01));
    CHECK(res.columns[0].term("l.ECI")->p < 0.01);
    CHECK(format_table(res, "panel").find("Residual Std. Error") == std::string::npos);
}
