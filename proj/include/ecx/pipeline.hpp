#pragma once

#include "ecx/complexity.hpp"
#include "ecx/diagnostics.hpp"
#include "ecx/ingest.hpp"
#include "ecx/matrix.hpp"
#include "ecx/regress.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ecx {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitInvalid = 2;

struct InputFile {
    std::filesystem::path path;
    std::optional<int> year;  // for files without a year column
};

struct NamedModel {
    std::string name;
    ModelSpec spec;
    Strategy strategy = Strategy::CM;  // whose ECI fills a missing key-regressor column
};

struct SynthSettings {
    std::string kind = "nested";  // "nested" or "capability"
    Eigen::Index regions = 20;
    Eigen::Index industries = 20;
    Eigen::Index capabilities = 20;
    double p_region = 0.5;
    double p_industry = 0.1;
    std::uint64_t seed = 1;
    int year = 2015;
    bool write_panel = false;
};

struct RunConfig {
    // paths
    std::vector<InputFile> inputs;
    std::optional<std::filesystem::path> geo_crosswalk;
    std::optional<std::filesystem::path> industry_crosswalk;
    std::optional<std::filesystem::path> size_classes;
    std::optional<std::filesystem::path> attributes;
    std::optional<std::filesystem::path> panel;  // default: <out>/panel.csv
    std::optional<std::filesystem::path> regression_data;
    std::filesystem::path out = "ecx-out";

    TableSchema schema;
    std::vector<int> years;  // empty: every year in the panel
    std::string geography = "county";  // "county" or "cbsa_plus_counties"
    std::string industry_level = "naics6";  // "naics2".."naics6" or "bcd_subcluster"
    std::vector<std::string> exclude_industries;

    std::vector<Strategy> strategies = {Strategy::BM, Strategy::RLQ, Strategy::WM, Strategy::Presence, Strategy::CM};
    std::vector<IndexKind> indices = {IndexKind::ECI, IndexKind::FI};
    StrategyParams strategy_params;
    EciOptions eci;
    FitnessOptions fitness;

    HeatmapFormat heatmap_format = HeatmapFormat::svg;
    bool heatmaps = true;
    std::size_t top_n = 10;
    std::string group_attribute = "traded_local";

    std::string entity_column = "entity";
    std::string year_column = "year";
    std::vector<NamedModel> models;

    SynthSettings synth;

    int jobs = 1;
    bool verbose = false;
};

// JSON config. Relative paths resolve against the config file's directory; unknown keys
// are rejected. Throws ConfigError.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
// Canonical JSON of the effective config (hashed into manifests).
std::string config_json(const RunConfig& cfg);

std::filesystem::path panel_path(const RunConfig& cfg);
std::filesystem::path scores_path(const RunConfig& cfg, int year, Strategy s, IndexKind k);

// Each command validates first (ConfigError/IoError before any file is written) and returns
// an exit code. Messages go to `log`.
int cmd_ingest(const RunConfig& cfg, std::ostream& log);
int cmd_compute(const RunConfig& cfg, std::ostream& log);
int cmd_diagnose(const RunConfig& cfg, std::ostream& log);
int cmd_regress(const RunConfig& cfg, std::ostream& log);
int cmd_synth(const RunConfig& cfg, std::ostream& log);

// Runs a command by name, mapping exceptions to exit codes: input, schema and config
// problems give 2, numeric or degenerate failures 1.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace ecx
