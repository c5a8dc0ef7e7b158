#include "ecx/pipeline.hpp"

#include "ecx/error.hpp"
#include "ecx/synth.hpp"
#include "ecx/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace ecx {

// ---------------------------------------------------------------------------
// config

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

char delimiter_from(const std::string& s)
{
    if (s == "\\t" || s == "tab") return '\t';
    if (s.size() != 1) throw ConfigError("delimiter must be a single character, got '" + s + "'");
    return s[0];
}

std::vector<std::string> strings(const json& obj, const char* key, const std::string& where)
{
    return get<std::vector<std::string>>(obj, key, where);
}

ControlGroups parse_controls(const json& j)
{
    check_keys(j, "controls", {"economic", "sociodemographic", "institutional"});
    ControlGroups g;
    if (j.contains("economic")) g.economic = strings(j, "economic", "controls");
    if (j.contains("sociodemographic")) g.sociodemographic = strings(j, "sociodemographic", "controls");
    if (j.contains("institutional")) g.institutional = strings(j, "institutional", "controls");
    return g;
}

NamedModel parse_model(const json& j, std::size_t index)
{
    const std::string where = "regressions[" + std::to_string(index) + "]";
    check_keys(j, where,
               {"name", "kind", "outcome", "key_regressor", "controls", "se", "outcome_divisor", "year", "start_year",
                "end_year", "first_year", "last_year", "strategy"});
    NamedModel m;
    m.name = j.contains("name") ? get<std::string>(j, "name", where) : "model" + std::to_string(index + 1);
    if (m.name.empty() || m.name.find_first_of("/\\") != std::string::npos) {
        throw ConfigError(where + ".name must be a plain file stem");
    }
    if (!j.contains("kind") || !j.contains("outcome")) throw ConfigError(where + ": 'kind' and 'outcome' are required");
    m.spec.kind = parse_model_kind(get<std::string>(j, "kind", where));
    m.spec.outcome = get<std::string>(j, "outcome", where);
    if (j.contains("key_regressor")) m.spec.key_regressor = get<std::string>(j, "key_regressor", where);
    if (j.contains("controls")) m.spec.controls = parse_controls(j.at("controls"));
    if (j.contains("se")) m.spec.se_kind = parse_se_kind(get<std::string>(j, "se", where));
    if (j.contains("outcome_divisor")) m.spec.outcome_divisor = get<double>(j, "outcome_divisor", where);
    if (j.contains("year")) m.spec.year = get<int>(j, "year", where);
    if (j.contains("start_year")) m.spec.start_year = get<int>(j, "start_year", where);
    if (j.contains("end_year")) m.spec.end_year = get<int>(j, "end_year", where);
    if (j.contains("first_year")) m.spec.first_year = get<int>(j, "first_year", where);
    if (j.contains("last_year")) m.spec.last_year = get<int>(j, "last_year", where);
    if (j.contains("strategy")) m.strategy = parse_strategy(get<std::string>(j, "strategy", where));
    return m;
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, "config",
               {"paths", "schema", "years", "geography", "industry_level", "exclude_industries", "strategies", "indices",
                "solver", "diagnose", "regression", "regressions", "synth", "jobs", "verbose"});
    RunConfig cfg;

    if (root.contains("paths")) {
        const auto& p = root.at("paths");
        check_keys(p, "paths",
                   {"employment", "geo_crosswalk", "industry_crosswalk", "size_classes", "attributes", "panel",
                    "regression_data", "output"});
        if (p.contains("employment")) {
            const auto& e = p.at("employment");
            if (!e.is_array()) throw ConfigError("paths.employment must be a list");
            for (const auto& item : e) {
                if (item.is_string()) {
                    cfg.inputs.push_back({resolve(base_dir, item.get<std::string>()), std::nullopt});
                } else {
                    check_keys(item, "paths.employment[]", {"path", "year"});
                    InputFile f{resolve(base_dir, get<std::string>(item, "path", "paths.employment[]")), std::nullopt};
                    if (item.contains("year")) f.year = get<int>(item, "year", "paths.employment[]");
                    cfg.inputs.push_back(f);
                }
            }
        }
        auto opt_path = [&](const char* key, std::optional<fs::path>& dst) {
            if (p.contains(key)) dst = resolve(base_dir, get<std::string>(p, key, "paths"));
        };
        opt_path("geo_crosswalk", cfg.geo_crosswalk);
        opt_path("industry_crosswalk", cfg.industry_crosswalk);
        opt_path("size_classes", cfg.size_classes);
        opt_path("attributes", cfg.attributes);
        opt_path("panel", cfg.panel);
        opt_path("regression_data", cfg.regression_data);
        if (p.contains("output")) cfg.out = resolve(base_dir, get<std::string>(p, "output", "paths"));
    }

    if (root.contains("schema")) {
        const auto& s = root.at("schema");
        check_keys(s, "schema",
                   {"year_column", "region_columns", "industry_column", "employment_column", "flag_column", "delimiter",
                    "first_year", "last_year", "zero_count_with_flag_is_suppressed", "rollup_markers"});
        auto& t = cfg.schema;
        if (s.contains("year_column")) t.year_column = get<std::string>(s, "year_column", "schema");
        if (s.contains("region_columns")) t.region_columns = strings(s, "region_columns", "schema");
        if (s.contains("industry_column")) t.industry_column = get<std::string>(s, "industry_column", "schema");
        if (s.contains("employment_column")) t.employment_column = get<std::string>(s, "employment_column", "schema");
        if (s.contains("flag_column")) t.flag_column = get<std::string>(s, "flag_column", "schema");
        if (s.contains("delimiter")) t.delimiter = delimiter_from(get<std::string>(s, "delimiter", "schema"));
        if (s.contains("first_year")) t.first_year = get<int>(s, "first_year", "schema");
        if (s.contains("last_year")) t.last_year = get<int>(s, "last_year", "schema");
        if (s.contains("zero_count_with_flag_is_suppressed")) {
            t.zero_count_with_flag_is_suppressed = get<bool>(s, "zero_count_with_flag_is_suppressed", "schema");
        }
        if (s.contains("rollup_markers")) t.rollup_markers = get<std::string>(s, "rollup_markers", "schema");
    }

    if (root.contains("years")) cfg.years = get<std::vector<int>>(root, "years", "config");
    if (root.contains("geography")) cfg.geography = get<std::string>(root, "geography", "config");
    if (root.contains("industry_level")) cfg.industry_level = get<std::string>(root, "industry_level", "config");
    if (root.contains("exclude_industries")) cfg.exclude_industries = strings(root, "exclude_industries", "config");
    if (root.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& s : strings(root, "strategies", "config")) cfg.strategies.push_back(parse_strategy(s));
    }
    if (root.contains("indices")) {
        cfg.indices.clear();
        for (const auto& s : strings(root, "indices", "config")) cfg.indices.push_back(parse_index_kind(s));
    }
    if (root.contains("solver")) {
        const auto& s = root.at("solver");
        check_keys(s, "solver", {"cutoff", "tol", "max_iter", "eci_dense_limit", "eci_tol", "eci_max_iter"});
        if (s.contains("cutoff")) cfg.strategy_params.cutoff = get<double>(s, "cutoff", "solver");
        if (s.contains("tol")) cfg.fitness.tol = get<double>(s, "tol", "solver");
        if (s.contains("max_iter")) cfg.fitness.max_iter = get<int>(s, "max_iter", "solver");
        if (s.contains("eci_dense_limit")) cfg.eci.dense_limit = get<Eigen::Index>(s, "eci_dense_limit", "solver");
        if (s.contains("eci_tol")) cfg.eci.power_tol = get<double>(s, "eci_tol", "solver");
        if (s.contains("eci_max_iter")) cfg.eci.power_max_iter = get<int>(s, "eci_max_iter", "solver");
    }
    if (root.contains("diagnose")) {
        const auto& d = root.at("diagnose");
        check_keys(d, "diagnose", {"heatmap_format", "heatmaps", "top_n", "group_attribute"});
        if (d.contains("heatmap_format")) {
            cfg.heatmap_format = parse_heatmap_format(get<std::string>(d, "heatmap_format", "diagnose"));
        }
        if (d.contains("heatmaps")) cfg.heatmaps = get<bool>(d, "heatmaps", "diagnose");
        if (d.contains("top_n")) cfg.top_n = get<std::size_t>(d, "top_n", "diagnose");
        if (d.contains("group_attribute")) cfg.group_attribute = get<std::string>(d, "group_attribute", "diagnose");
    }
    if (root.contains("regression")) {
        const auto& r = root.at("regression");
        check_keys(r, "regression", {"entity_column", "year_column"});
        if (r.contains("entity_column")) cfg.entity_column = get<std::string>(r, "entity_column", "regression");
        if (r.contains("year_column")) cfg.year_column = get<std::string>(r, "year_column", "regression");
    }
    if (root.contains("regressions")) {
        const auto& list = root.at("regressions");
        if (!list.is_array()) throw ConfigError("regressions must be a list");
        for (std::size_t i = 0; i < list.size(); ++i) cfg.models.push_back(parse_model(list[i], i));
    }
    if (root.contains("synth")) {
        const auto& s = root.at("synth");
        check_keys(s, "synth",
                   {"kind", "regions", "industries", "capabilities", "p_region", "p_industry", "seed", "year", "write_panel"});
        auto& y = cfg.synth;
        if (s.contains("kind")) y.kind = get<std::string>(s, "kind", "synth");
        if (s.contains("regions")) y.regions = get<Eigen::Index>(s, "regions", "synth");
        if (s.contains("industries")) y.industries = get<Eigen::Index>(s, "industries", "synth");
        if (s.contains("capabilities")) y.capabilities = get<Eigen::Index>(s, "capabilities", "synth");
        if (s.contains("p_region")) y.p_region = get<double>(s, "p_region", "synth");
        if (s.contains("p_industry")) y.p_industry = get<double>(s, "p_industry", "synth");
        if (s.contains("seed")) y.seed = get<std::uint64_t>(s, "seed", "synth");
        if (s.contains("year")) y.year = get<int>(s, "year", "synth");
        if (s.contains("write_panel")) y.write_panel = get<bool>(s, "write_panel", "synth");
    }
    if (root.contains("jobs")) cfg.jobs = get<int>(root, "jobs", "config");
    if (root.contains("verbose")) cfg.verbose = get<bool>(root, "verbose", "config");
    return cfg;
}

RunConfig load_config(const fs::path& path)
{
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse_config(read_file(path), path.parent_path());
}

std::string config_json(const RunConfig& cfg)
{
    auto opt = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
    json j;
    json inputs = json::array();
    for (const auto& f : cfg.inputs) {
        inputs.push_back({{"path", f.path.generic_string()}, {"year", f.year ? json(*f.year) : json(nullptr)}});
    }
    j["paths"] = {{"employment", inputs},
                  {"geo_crosswalk", opt(cfg.geo_crosswalk)},
                  {"industry_crosswalk", opt(cfg.industry_crosswalk)},
                  {"size_classes", opt(cfg.size_classes)},
                  {"attributes", opt(cfg.attributes)},
                  {"panel", opt(cfg.panel)},
                  {"regression_data", opt(cfg.regression_data)},
                  {"output", cfg.out.generic_string()}};
    const auto& s = cfg.schema;
    j["schema"] = {{"year_column", s.year_column},
                   {"region_columns", s.region_columns},
                   {"industry_column", s.industry_column},
                   {"employment_column", s.employment_column},
                   {"flag_column", s.flag_column},
                   {"delimiter", std::string(1, s.delimiter)},
                   {"first_year", s.first_year},
                   {"last_year", s.last_year},
                   {"zero_count_with_flag_is_suppressed", s.zero_count_with_flag_is_suppressed},
                   {"rollup_markers", s.rollup_markers}};
    j["years"] = cfg.years;
    j["geography"] = cfg.geography;
    j["industry_level"] = cfg.industry_level;
    j["exclude_industries"] = cfg.exclude_industries;
    json strategies = json::array();
    for (auto st : cfg.strategies) strategies.push_back(std::string(to_string(st)));
    json indices = json::array();
    for (auto k : cfg.indices) indices.push_back(std::string(to_string(k)));
    j["strategies"] = strategies;
    j["indices"] = indices;
    j["solver"] = {{"cutoff", cfg.strategy_params.cutoff},
                   {"tol", cfg.fitness.tol},
                   {"max_iter", cfg.fitness.max_iter},
                   {"eci_dense_limit", cfg.eci.dense_limit},
                   {"eci_tol", cfg.eci.power_tol},
                   {"eci_max_iter", cfg.eci.power_max_iter}};
    j["diagnose"] = {{"heatmap_format", cfg.heatmap_format == HeatmapFormat::svg ? "svg" : "csv"},
                     {"heatmaps", cfg.heatmaps},
                     {"top_n", cfg.top_n},
                     {"group_attribute", cfg.group_attribute}};
    j["regression"] = {{"entity_column", cfg.entity_column}, {"year_column", cfg.year_column}};
    json models = json::array();
    for (const auto& m : cfg.models) {
        const auto& sp = m.spec;
        json mj = {{"name", m.name},
                   {"kind", std::string(to_string(sp.kind))},
                   {"outcome", sp.outcome},
                   {"key_regressor", sp.key_regressor},
                   {"controls",
                    {{"economic", sp.controls.economic},
                     {"sociodemographic", sp.controls.sociodemographic},
                     {"institutional", sp.controls.institutional}}},
                   {"se", std::string(to_string(sp.se_kind))},
                   {"outcome_divisor", sp.outcome_divisor},
                   {"year", sp.year},
                   {"start_year", sp.start_year},
                   {"end_year", sp.end_year},
                   {"strategy", std::string(to_string(m.strategy))}};
        if (sp.first_year) mj["first_year"] = *sp.first_year;
        if (sp.last_year) mj["last_year"] = *sp.last_year;
        models.push_back(mj);
    }
    j["regressions"] = models;
    const auto& y = cfg.synth;
    j["synth"] = {{"kind", y.kind},
                  {"regions", y.regions},
                  {"industries", y.industries},
                  {"capabilities", y.capabilities},
                  {"p_region", y.p_region},
                  {"p_industry", y.p_industry},
                  {"seed", y.seed},
                  {"year", y.year},
                  {"write_panel", y.write_panel}};
    return j.dump(2) + "\n";
}

fs::path panel_path(const RunConfig& cfg)
{
    return cfg.panel ? *cfg.panel : cfg.out / "panel.csv";
}

fs::path scores_path(const RunConfig& cfg, int year, Strategy s, IndexKind k)
{
    return cfg.out / "scores" / (std::to_string(year) + "_" + std::string(to_string(s)) + "_" + std::string(to_string(k)) + ".csv");
}

// ---------------------------------------------------------------------------
// shared plumbing

namespace {

struct Logger {
    std::ostream& out;
    bool verbose;
    void info(const std::string& msg) const
    {
        if (verbose) out << msg << '\n';
    }
    void warn(const std::string& msg) const { out << "warning: " << msg << '\n'; }
    void error(const std::string& msg) const { out << "error: " << msg << '\n'; }
};

// Output files of one command, hashed into its manifest.
class Outputs {
public:
    explicit Outputs(fs::path root) : root_(std::move(root)) {}

    void write(const fs::path& path, std::string_view content)
    {
        write_file(path, content);
        record(path);
    }
    void record(const fs::path& path) { files_.insert(path); }

    // Relative paths, sorted; written last.
    void write_manifest(const std::string& command, const RunConfig& cfg, const std::vector<fs::path>& inputs,
                        json extra)
    {
        json j;
        j["command"] = command;
        j["config_sha256"] = sha256_hex(config_json(cfg));
        json in = json::array();
        for (const auto& p : inputs) in.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
        j["inputs"] = in;
        json out = json::array();
        for (const auto& p : files_) {
            out.push_back({{"path", fs::relative(p, root_).generic_string()}, {"sha256", sha256_file(p)}});
        }
        j["outputs"] = out;
        for (auto& [k, v] : extra.items()) j[k] = v;
        write_file(root_ / ("manifest_" + command + ".json"), j.dump(2) + "\n");
    }

private:
    fs::path root_;
    std::set<fs::path> files_;
};

void require_file(const fs::path& p, const std::string& what)
{
    if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

std::vector<int> select_years(const RunConfig& cfg, const EmploymentPanel& panel)
{
    const auto available = panel.years();
    if (cfg.years.empty()) return available;
    for (int y : cfg.years) {
        if (!std::binary_search(available.begin(), available.end(), y)) {
            std::string list;
            for (int a : available) list += (list.empty() ? "" : ", ") + std::to_string(a);
            throw ConfigError("year " + std::to_string(y) + " not in panel (available: " + list + ")");
        }
    }
    auto years = cfg.years;
    std::sort(years.begin(), years.end());
    years.erase(std::unique(years.begin(), years.end()), years.end());
    return years;
}

void require_nonempty_choices(const RunConfig& cfg)
{
    if (cfg.strategies.empty()) throw ConfigError("no input-matrix strategies configured");
    if (cfg.indices.empty()) throw ConfigError("no complexity indices configured");
}

int naics_digits(const std::string& level)
{
    if (level.size() == 6 && level.rfind("naics", 0) == 0 && level[5] >= '2' && level[5] <= '6') return level[5] - '0';
    return 0;
}

std::string combo_name(int year, Strategy s, IndexKind k)
{
    return std::to_string(year) + " " + std::string(to_string(s)) + " " + std::string(to_string(k));
}

// Row and column totals of the raw employment, aligned to an input matrix's catalogs.
std::pair<Eigen::VectorXd, Eigen::VectorXd> employment_totals(const EmploymentMatrix& raw, const InputMatrix& m)
{
    Eigen::VectorXd rows(static_cast<Eigen::Index>(m.regions.size()));
    Eigen::VectorXd cols(static_cast<Eigen::Index>(m.industries.size()));
    for (std::size_t r = 0; r < m.regions.size(); ++r) {
        rows(static_cast<Eigen::Index>(r)) = raw.values.row(static_cast<Eigen::Index>(*raw.regions.find(m.regions.code(r)))).sum();
    }
    for (std::size_t c = 0; c < m.industries.size(); ++c) {
        cols(static_cast<Eigen::Index>(c)) =
            raw.values.col(static_cast<Eigen::Index>(*raw.industries.find(m.industries.code(c)))).sum();
    }
    return {rows, cols};
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const RunConfig& cfg, std::ostream& os)
{
    Logger log{os, cfg.verbose};

    // Validation: nothing is written unless every referenced file exists and the levels parse.
    if (cfg.inputs.empty()) throw ConfigError("no employment input files configured");
    for (const auto& f : cfg.inputs) require_file(f.path, "employment file");
    if (cfg.geography == "cbsa_plus_counties") {
        if (!cfg.geo_crosswalk) throw ConfigError("geography cbsa_plus_counties needs paths.geo_crosswalk");
        require_file(*cfg.geo_crosswalk, "geographic crosswalk");
    } else if (cfg.geography != "county") {
        throw ConfigError("unknown geography '" + cfg.geography + "' (expected county or cbsa_plus_counties)");
    } else if (cfg.geo_crosswalk) {
        require_file(*cfg.geo_crosswalk, "geographic crosswalk");
    }
    const int digits = naics_digits(cfg.industry_level);
    if (cfg.industry_level == "bcd_subcluster") {
        if (!cfg.industry_crosswalk) throw ConfigError("industry level bcd_subcluster needs paths.industry_crosswalk");
        require_file(*cfg.industry_crosswalk, "industry crosswalk");
    } else if (digits == 0) {
        throw ConfigError("unknown industry level '" + cfg.industry_level + "' (expected naics2..naics6 or bcd_subcluster)");
    }
    if (cfg.size_classes) require_file(*cfg.size_classes, "size-class table");

    const auto table = cfg.size_classes ? SizeClassTable::load(*cfg.size_classes) : SizeClassTable::cbp_default();
    const auto geo = cfg.geography == "cbsa_plus_counties"
                         ? std::optional<Crosswalk>(Crosswalk::load(*cfg.geo_crosswalk, CrosswalkKind::geographic))
                         : std::nullopt;
    const auto clusters = digits == 0
                              ? std::optional<Crosswalk>(Crosswalk::load(*cfg.industry_crosswalk, CrosswalkKind::industry))
                              : std::nullopt;

    std::vector<RawEmploymentRecord> records;
    json files = json::array();
    std::size_t total_rejects = 0;
    for (const auto& f : cfg.inputs) {
        auto schema = cfg.schema;
        schema.fixed_year = f.year;
        auto parsed = parse_employment_table(f.path, schema);
        json rejects = json::array();
        for (const auto& r : parsed.rejects) {
            rejects.push_back({{"line", r.line}, {"reason", r.reason}});
            log.warn(f.path.string() + ":" + std::to_string(r.line) + ": " + r.reason);
        }
        total_rejects += parsed.rejects.size();
        files.push_back({{"path", f.path.generic_string()},
                         {"records", parsed.records.size()},
                         {"skipped", parsed.skipped},
                         {"rejected", rejects}});
        log.info(f.path.string() + ": " + std::to_string(parsed.records.size()) + " records");
        records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                       std::make_move_iterator(parsed.records.end()));
    }

    EmploymentPanel panel;
    try {
        panel = impute_suppressed(records, table);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
    }
    const double raw_total = panel.total_employment();
    const double imputed_total = panel.total_imputed();
    const std::size_t imputed_cells = panel.imputed_cells();
    const std::size_t cells = panel.records().size();

    if (!cfg.exclude_industries.empty()) panel = exclude_industries(panel, cfg.exclude_industries);
    if (geo) panel = aggregate_geography(panel, *geo);
    AggregationReport agg;
    panel = clusters ? aggregate_industry(panel, *clusters, &agg) : aggregate_industry(panel, digits, &agg);
    for (const auto& issue : agg.issues) log.warn("industry " + issue.code + ": " + issue.reason);

    fs::create_directories(cfg.out);
    Outputs outputs(cfg.out);
    const auto panel_file = cfg.out / "panel.csv";
    outputs.write(panel_file, serialize_panel(panel));

    json per_year = json::array();
    for (int y : panel.years()) {
        double total = 0;
        for (const auto& r : panel.records()) {
            if (r.year == y) total += r.employment;
        }
        per_year.push_back({{"year", y}, {"employment", total}});
    }
    json issues = json::array();
    for (const auto& i : agg.issues) issues.push_back({{"code", i.code}, {"reason", i.reason}});
    json report;
    report["files"] = files;
    report["raw_cells"] = cells;
    report["imputed_cells"] = imputed_cells;
    report["total_employment"] = raw_total;
    report["imputed_employment"] = imputed_total;
    report["imputed_share"] = raw_total > 0 ? imputed_total / raw_total : 0.0;
    report["size_class_policy"] = table.open_class_policy();
    report["geography"] = cfg.geography;
    report["industry_level"] = cfg.industry_level;
    report["excluded_prefixes"] = cfg.exclude_industries;
    report["dropped_industries"] = issues;
    report["dropped_employment"] = agg.dropped_employment;
    report["panel_employment"] = panel.total_employment();
    report["regions"] = panel.regions().size();
    report["industries"] = panel.industries().size();
    report["years"] = per_year;
    outputs.write(cfg.out / "ingest_report.json", report.dump(2) + "\n");

    std::vector<fs::path> inputs;
    for (const auto& f : cfg.inputs) inputs.push_back(f.path);
    for (const auto* p : {&cfg.geo_crosswalk, &cfg.industry_crosswalk, &cfg.size_classes}) {
        if (*p) inputs.push_back(**p);
    }
    outputs.write_manifest("ingest", cfg, inputs, json::object());

    os << "ingest: " << panel.records().size() << " cells, total employment " << format_double(raw_total)
       << ", imputed " << format_double(imputed_total) << " (" << format_fixed(100.0 * (raw_total > 0 ? imputed_total / raw_total : 0.0), 1)
       << "%), " << total_rejects << " rejected rows\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compute

int cmd_compute(const RunConfig& cfg, std::ostream& os)
{
    Logger log{os, cfg.verbose};
    require_nonempty_choices(cfg);
    if (cfg.jobs < 1) throw ConfigError("--jobs must be at least 1");
    const auto pfile = panel_path(cfg);
    require_file(pfile, "panel file (run ingest first)");
    const auto panel = read_panel(pfile);
    const auto years = select_years(cfg, panel);

    std::map<int, EmploymentMatrix> matrices;
    for (int y : years) matrices.emplace(y, build_matrix(panel, y));

    struct Job {
        int year;
        Strategy strategy;
        IndexKind index;
        std::string error;
        std::vector<std::string> warnings;
        bool ok = false;
    };
    std::vector<Job> jobs;
    for (int y : years) {
        for (auto s : cfg.strategies) {
            for (auto k : cfg.indices) jobs.push_back({y, s, k, {}, {}, false});
        }
    }

    fs::create_directories(cfg.out / "scores");
    auto run_job = [&](Job& job) {
        try {
            auto input = build_input_matrix(matrices.at(job.year), job.strategy, cfg.strategy_params);
            auto [pruned, report] = prune_empty(input);
            auto scores = job.index == IndexKind::ECI ? eci(pruned, cfg.eci) : fitness(pruned, cfg.fitness);
            scores.year = job.year;
            job.warnings = scores.warnings;
            const auto path = scores_path(cfg, job.year, job.strategy, job.index);
            write_file(path, scores_csv(scores));
            auto meta = json::parse(scores_metadata_json(scores));
            meta["prune_report"] = json::parse(matrix_sidecar_json(pruned, report))["prune_report"];
            write_file(fs::path(path).replace_extension(".json"), meta.dump(2) + "\n");
            job.ok = true;
        } catch (const std::exception& e) {
            job.error = e.what();
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(jobs[i]);
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Outputs outputs(cfg.out);
    json failures = json::array();
    std::size_t failed = 0;
    for (const auto& job : jobs) {
        const auto name = combo_name(job.year, job.strategy, job.index);
        for (const auto& w : job.warnings) log.warn(name + ": " + w);
        if (job.ok) {
            const auto path = scores_path(cfg, job.year, job.strategy, job.index);
            outputs.record(path);
            outputs.record(fs::path(path).replace_extension(".json"));
            log.info(name + ": ok");
        } else {
            ++failed;
            log.error(name + ": " + job.error);
            failures.push_back({{"year", job.year},
                                {"strategy", std::string(to_string(job.strategy))},
                                {"index", std::string(to_string(job.index))},
                                {"error", job.error}});
        }
    }
    outputs.write_manifest("compute", cfg, {pfile}, {{"failures", failures}});
    os << "compute: " << jobs.size() - failed << " of " << jobs.size() << " combinations written";
    if (failed > 0) os << ", " << failed << " failed";
    os << '\n';
    return failed == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// diagnose

namespace {

ComplexityScores load_scores(const fs::path& path)
{
    require_file(path, "score file (run compute first)");
    return parse_scores_csv(read_file(path));
}

std::string correlation_matrix_csv(const std::vector<std::string>& names, const std::vector<ScoreSeries>& series,
                                   std::vector<std::string>& problems)
{
    std::string out = "strategy";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    for (std::size_t a = 0; a < series.size(); ++a) {
        out += names[a];
        for (std::size_t b = 0; b < series.size(); ++b) {
            double v = std::numeric_limits<double>::quiet_NaN();
            try {
                auto pair = align(series[a], series[b]);
                v = correlate(pair.a, pair.b);
            } catch (const Error& e) {
                if (a < b) problems.push_back(names[a] + " vs " + names[b] + ": " + e.what());
            }
            out += "," + format_double(v);
        }
        out += "\n";
    }
    return out;
}

}  // namespace

int cmd_diagnose(const RunConfig& cfg, std::ostream& os)
{
    Logger log{os, cfg.verbose};
    require_nonempty_choices(cfg);
    const auto pfile = panel_path(cfg);
    require_file(pfile, "panel file (run ingest first)");
    const auto panel = read_panel(pfile);
    const auto years = select_years(cfg, panel);

    // Every expected score file must exist before anything is written.
    for (int y : years) {
        for (auto s : cfg.strategies) {
            for (auto k : cfg.indices) require_file(scores_path(cfg, y, s, k), "score file (run compute first)");
        }
    }
    std::optional<AttributeTable> attributes;
    if (cfg.attributes) {
        require_file(*cfg.attributes, "attribute table");
        attributes = AttributeTable::load(*cfg.attributes);
    }

    const auto dir = cfg.out / "diagnostics";
    fs::create_directories(dir);
    Outputs outputs(cfg.out);
    std::vector<fs::path> inputs = {pfile};
    std::vector<std::string> problems;

    for (int y : years) {
        const auto ys = std::to_string(y);
        std::map<std::pair<Strategy, IndexKind>, ComplexityScores> scores;
        for (auto s : cfg.strategies) {
            for (auto k : cfg.indices) {
                const auto path = scores_path(cfg, y, s, k);
                inputs.push_back(path);
                scores.emplace(std::pair{s, k}, load_scores(path));
            }
        }
        std::vector<std::string> names;
        for (auto s : cfg.strategies) names.emplace_back(to_string(s));

        // Cross-strategy correlations of region scores, one matrix per index.
        for (auto k : cfg.indices) {
            std::vector<ScoreSeries> series;
            for (auto s : cfg.strategies) series.push_back(region_series(scores.at({s, k})));
            outputs.write(dir / (ys + "_" + std::string(to_string(k)) + "_correlations.csv"),
                          correlation_matrix_csv(names, series, problems));
        }

        // ECI against FI and log FI, per strategy.
        const bool both = std::count(cfg.indices.begin(), cfg.indices.end(), IndexKind::ECI) &&
                          std::count(cfg.indices.begin(), cfg.indices.end(), IndexKind::FI);
        if (both) {
            std::string out = "strategy,n,pearson_eci_fi,pearson_eci_log_fi,spearman_eci_fi\n";
            for (auto s : cfg.strategies) {
                auto pair = align(region_series(scores.at({s, IndexKind::ECI})), region_series(scores.at({s, IndexKind::FI})));
                auto safe = [&](Transform t, CorrelationKind kind) {
                    try {
                        return correlate(pair.a, pair.b, t, kind);
                    } catch (const Error& e) {
                        problems.push_back(ys + " " + std::string(to_string(s)) + " eci vs fi: " + e.what());
                        return std::numeric_limits<double>::quiet_NaN();
                    }
                };
                out += std::string(to_string(s)) + "," + std::to_string(pair.a.size()) + "," +
                       format_double(safe(Transform::none, CorrelationKind::pearson)) + "," +
                       format_double(safe(Transform::log, CorrelationKind::pearson)) + "," +
                       format_double(safe(Transform::none, CorrelationKind::spearman)) + "\n";
            }
            outputs.write(dir / (ys + "_eci_vs_fi.csv"), out);
        }

        for (auto s : cfg.strategies) {
            const auto stem = ys + "_" + std::string(to_string(s));
            if (cfg.heatmaps) {
                const auto raw = build_matrix(panel, y);
                try {
                    auto [pruned, report] = prune_empty(build_input_matrix(raw, s, cfg.strategy_params));
                    auto [rows, cols] = employment_totals(raw, pruned);
                    const auto view = order_for_triangularity(pruned, &rows, &cols);
                    const auto ext = cfg.heatmap_format == HeatmapFormat::svg ? ".svg" : ".csv";
                    const auto path = dir / (stem + "_heatmap" + ext);
                    export_heatmap(view, path, cfg.heatmap_format);
                    outputs.record(path);
                } catch (const DegenerateError& e) {
                    problems.push_back(stem + " heatmap: " + e.what());
                }
            }
            for (auto k : cfg.indices) {
                const auto& sc = scores.at({s, k});
                const auto kstem = stem + "_" + std::string(to_string(k));
                const auto regions = region_series(sc);
                const auto industries = industry_series(sc);
                const auto* attr = attributes ? &*attributes : nullptr;
                auto ranked = [&](const ScoreSeries& series, const std::string& side) {
                    const auto n = std::min(cfg.top_n, series.codes.size());
                    const auto t = top_bottom(series, n, attr, cfg.group_attribute);
                    outputs.write(dir / (kstem + "_" + side + "_top_bottom.csv"), ranked_table_csv(t));
                    outputs.write(dir / (kstem + "_" + side + "_top_bottom.txt"), ranked_table_text(t));
                };
                ranked(regions, "region");
                ranked(industries, "industry");
                if (attributes) {
                    const auto g = group_summary(industries, *attributes, cfg.group_attribute);
                    outputs.write(dir / (kstem + "_industry_groups.csv"), group_summary_csv(g));
                    outputs.write(dir / (kstem + "_industry_groups.txt"), group_summary_text(g));
                }
            }
        }
    }
    for (const auto& p : problems) log.warn(p);
    if (cfg.attributes) inputs.push_back(*cfg.attributes);
    json warnings = problems;
    outputs.write_manifest("diagnose", cfg, inputs, {{"warnings", warnings}});
    os << "diagnose: " << years.size() << " year(s), " << cfg.strategies.size() << " strategies\n";
    return problems.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// regress

int cmd_regress(const RunConfig& cfg, std::ostream& os)
{
    Logger log{os, cfg.verbose};
    if (cfg.models.empty()) throw ConfigError("no regression models configured");
    if (!cfg.regression_data) throw ConfigError("regressions need paths.regression_data");
    require_file(*cfg.regression_data, "regression data");
    auto data = Dataset::load(*cfg.regression_data, cfg.entity_column, cfg.year_column);

    std::vector<fs::path> inputs = {*cfg.regression_data};
    // Fill a missing key-regressor column from computed region ECI scores.
    for (const auto& m : cfg.models) {
        const auto& key = m.spec.key_regressor;
        if (data.has(key)) continue;
        std::set<int> years;
        for (std::size_t r = 0; r < data.size(); ++r) years.insert(data.year(r));
        std::vector<double> column(data.size(), std::numeric_limits<double>::quiet_NaN());
        std::size_t found = 0;
        std::optional<fs::path> first_missing;
        for (int y : years) {
            const auto path = scores_path(cfg, y, m.strategy, IndexKind::ECI);
            if (!fs::is_regular_file(path)) {
                if (!first_missing) first_missing = path;
                continue;
            }
            ++found;
            inputs.push_back(path);
            const auto sc = parse_scores_csv(read_file(path));
            for (std::size_t i = 0; i < sc.regions.size(); ++i) {
                if (auto row = data.find(sc.regions.code(i), y)) column[*row] = sc.region_scores(static_cast<Eigen::Index>(i));
            }
        }
        if (found == 0) {
            throw IoError("dataset has no '" + key + "' column and no score file was found, expected " +
                          first_missing->string());
        }
        if (first_missing) log.warn("no score file " + first_missing->string() + "; those rows have no " + key);
        data.add_column(key, std::move(column));
    }

    const auto dir = cfg.out / "regress";
    fs::create_directories(dir);
    Outputs outputs(cfg.out);
    std::size_t failed = 0;
    for (const auto& m : cfg.models) {
        try {
            const auto res = run_model(data, m.spec);
            outputs.write(dir / (m.name + ".txt"), format_table(res, m.name));
            outputs.write(dir / (m.name + ".csv"), results_csv(res));
            for (const auto& w : res.warnings) log.warn(m.name + ": " + w);
            log.info(m.name + ": ok");
        } catch (const NumericError& e) {
            ++failed;
            log.error(m.name + ": " + e.what());
        }
    }
    outputs.write_manifest("regress", cfg, inputs, json::object());
    os << "regress: " << cfg.models.size() - failed << " of " << cfg.models.size() << " models written\n";
    return failed == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const RunConfig& cfg, std::ostream& os)
{
    const auto& s = cfg.synth;
    if (s.regions < 1 || s.industries < 1) throw ConfigError("synth needs at least one region and one industry");
    const auto dir = cfg.out / "synth";
    Outputs outputs(cfg.out);

    Eigen::MatrixXd presence;
    json sidecar;
    std::string capability_csv;
    if (s.kind == "nested") {
        presence = generate_nested(s.regions, s.industries);
        sidecar = {{"kind", "nested"}, {"regions", s.regions}, {"industries", s.industries}};
    } else if (s.kind == "capability") {
        if (s.capabilities < 1) throw ConfigError("synth capability model needs at least one capability");
        for (double p : {s.p_region, s.p_industry}) {
            if (!(p >= 0 && p <= 1)) throw ConfigError("synth probabilities must lie in [0, 1]");
        }
        auto inst = generate_capability_model(s.regions, s.industries, s.capabilities, s.p_region, s.p_industry, s.seed);
        presence = inst.presence;
        sidecar = json::parse(capability_model_json(inst.model));
        sidecar["kind"] = "capability";
        const auto counts = inst.model.capability_counts();
        capability_csv = "region,capabilities\n";
        const auto m = InputMatrix::from_values(presence);
        for (Eigen::Index r = 0; r < counts.size(); ++r) {
            capability_csv += m.regions.code(static_cast<std::size_t>(r)) + "," + format_double(counts(r)) + "\n";
        }
    } else {
        throw ConfigError("unknown synth kind '" + s.kind + "' (expected nested or capability)");
    }

    fs::create_directories(dir);
    const auto m = InputMatrix::from_values(presence);
    outputs.write(dir / "matrix.csv", matrix_triplets_csv(m));
    outputs.write(dir / "matrix.json", sidecar.dump(2) + "\n");
    if (!capability_csv.empty()) outputs.write(dir / "capabilities.csv", capability_csv);
    if (s.write_panel) {
        PanelBuilder b;
        for (Eigen::Index r = 0; r < presence.rows(); ++r) {
            for (Eigen::Index c = 0; c < presence.cols(); ++c) {
                if (presence(r, c) != 0) {
                    b.add(s.year, m.regions.code(static_cast<std::size_t>(r)), m.industries.code(static_cast<std::size_t>(c)),
                          presence(r, c), 0, false);
                }
            }
        }
        outputs.write(panel_path(cfg), serialize_panel(std::move(b).build()));
    }
    json extra = {{"kind", s.kind}};
    if (s.kind == "capability") extra["seed"] = s.seed;
    outputs.write_manifest("synth", cfg, {}, extra);
    os << "synth: " << s.kind << " " << presence.rows() << "x" << presence.cols() << " matrix with "
       << static_cast<long>(presence.sum()) << " nonzero cells\n";
    return kExitOk;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log)
{
    try {
        if (name == "ingest") return cmd_ingest(cfg, log);
        if (name == "compute") return cmd_compute(cfg, log);
        if (name == "diagnose") return cmd_diagnose(cfg, log);
        if (name == "regress") return cmd_regress(cfg, log);
        if (name == "synth") return cmd_synth(cfg, log);
        log << "error: unknown command '" << name << "'\n";
        return kExitInvalid;
    } catch (const DegenerateError& e) {
        log << "error: " << e.what() << '\n';
        return kExitPartial;
    } catch (const NumericError& e) {
        log << "error: " << e.what() << '\n';
        return kExitPartial;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
}

}  // namespace ecx
