#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecx {

enum class SeKind { classical, hc1 };
std::string_view to_string(SeKind k);
SeKind parse_se_kind(std::string_view name);

struct Term {
    std::string name;
    double coef = 0;
    double se = 0;
    double t = 0;
    double p = 1;
};

// "*" p < 0.1, "**" p < 0.05, "***" p < 0.01.
std::string stars(double p);

struct RegressionResult {
    std::string label;
    std::vector<Term> terms;
    std::size_t n_obs = 0;
    std::size_t n_deleted = 0;
    double r2 = 0;
    double adj_r2 = 0;
    double resid_se = 0;
    double f_stat = 0;
    int f_df1 = 0;
    int f_df2 = 0;
    double f_p = 1;
    SeKind se_kind = SeKind::hc1;
    // "centered" for OLS with intercept, "within" for LSDV
    std::string r2_kind = "centered";
    Eigen::MatrixXd covariance;  // of `terms`, in order
    std::vector<std::string> warnings;
    std::vector<std::string> dropped_terms;

    const Term* term(const std::string& name) const;
};

// OLS of y on X. X must contain its own intercept column when `has_intercept` is set;
// R^2 is then centered and the F statistic tests every other column jointly.
// Coefficients come from a column-pivoted QR; covariance is HC1
//   n/(n-k) (X'X)^-1 X' diag(e^2) X (X'X)^-1
// or classical s^2 (X'X)^-1. p-values use Student t with n-k degrees of freedom.
// Throws NumericError naming collinear columns, ConfigError when n <= k.
RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                     SeKind se_kind = SeKind::hc1, bool has_intercept = true);

// Least-squares dummy-variable fit: y on X plus intercept, entity dummies and period dummies
// (first level of each omitted). Only the X coefficients are reported. A column of X with no
// variation left after the dummies is dropped with a warning. R^2 is the within R^2
// 1 - RSS / ||M_D y||^2 with M_D the annihilator of the dummy space; the F statistic tests
// the X columns jointly.
RegressionResult lsdv(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                      const std::vector<std::size_t>& entity, const std::vector<std::size_t>& period,
                      SeKind se_kind = SeKind::hc1);

// Rows keyed by (entity, year); numeric columns with NaN for missing.
class Dataset {
public:
    // Missing cells: "", "NA", "NaN", ".". Throws SchemaError on duplicate keys or non-numeric cells.
    static Dataset load(const std::filesystem::path& path, const std::string& entity_column = "entity",
                        const std::string& year_column = "year", char delim = ',');

    void add_row(const std::string& entity, int year);
    void set(const std::string& column, std::size_t row, double value);
    void add_column(const std::string& name, std::vector<double> values);

    std::size_t size() const { return entities_.size(); }
    const std::string& entity(std::size_t row) const { return entities_.at(row); }
    int year(std::size_t row) const { return years_.at(row); }
    bool has(const std::string& column) const { return columns_.count(column) > 0; }
    const std::vector<double>& column(const std::string& name) const;
    std::optional<std::size_t> find(const std::string& entity, int year) const;
    std::vector<std::string> column_names() const;

private:
    std::vector<std::string> entities_;
    std::vector<int> years_;
    std::map<std::string, std::vector<double>> columns_;
    std::map<std::pair<std::string, int>, std::size_t> index_;
};

enum class ModelKind { cross_section, period_growth, panel_lsdv };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

struct ControlGroups {
    std::vector<std::string> economic = {"Unemployment", "ManuShare", "Patent"};
    std::vector<std::string> sociodemographic = {"Population", "MedianAge", "Education", "BlackShare", "Foreign"};
    std::vector<std::string> institutional = {"UnionCoverage", "MinimumWage", "Vote"};
};

struct ModelSpec {
    ModelKind kind = ModelKind::cross_section;
    std::string outcome;
    std::string key_regressor = "ECI";
    ControlGroups controls;
    SeKind se_kind = SeKind::hc1;
    // cross_section and panel_lsdv: outcome divided by this before fitting (table units).
    double outcome_divisor = 1000.0;
    int year = 0;        // cross_section
    int start_year = 0;  // period_growth
    int end_year = 0;    // period_growth
    std::optional<int> first_year;  // panel_lsdv, inclusive filter
    std::optional<int> last_year;
};

// Five nested columns: (1) key regressor, (2) + economic, (3) + sociodemographic,
// (4) + institutional, (5) all controls.
struct ResultSet {
    ModelSpec spec;
    std::vector<RegressionResult> columns;
    std::vector<std::string> warnings;
};

ResultSet run_cross_section(const Dataset& data, const ModelSpec& spec);
// Outcome (end - start) / start; regressors from the start year plus the start-year outcome level.
ResultSet run_period_growth(const Dataset& data, const ModelSpec& spec);
// Outcome on the key regressor lagged one year, controls, entity and year dummies.
ResultSet run_panel_lsdv(const Dataset& data, const ModelSpec& spec);
ResultSet run_model(const Dataset& data, const ModelSpec& spec);

// Plain-text table: coefficient (with stars) over parenthesized SE, one column per model,
// footer with observations, R^2, adjusted R^2, residual SE (OLS), F statistic and star legend.
std::string format_table(const ResultSet& results, const std::string& title);
std::string results_csv(const ResultSet& results);

}  // namespace ecx
