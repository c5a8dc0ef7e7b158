// ecx: regional economic-complexity pipeline.
//
//   ecx synth --kind nested --regions 30 --industries 30 --panel
//   ecx --config run.json ingest
//   ecx --config run.json compute --jobs 4
//   ecx --config run.json diagnose
//   ecx --config run.json regress

#include "ecx/error.hpp"
#include "ecx/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::string out;
    int jobs = 0;
    bool verbose = false;

    std::vector<std::string> inputs;
    std::string geo_crosswalk;
    std::string industry_crosswalk;
    std::string size_classes;
    std::string attributes;
    std::string panel;
    std::string geography;
    std::string industry_level;
    std::vector<int> years;
    std::vector<std::string> strategies;
    std::vector<std::string> indices;
    std::optional<double> cutoff;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::string heatmap_format;
    std::optional<std::size_t> top_n;
    std::string data;

    std::string synth_kind;
    std::optional<long> regions;
    std::optional<long> industries;
    std::optional<long> capabilities;
    std::optional<double> p_region;
    std::optional<double> p_industry;
    std::optional<std::uint64_t> seed;
    bool synth_panel = false;
};

ecx::RunConfig effective_config(const Flags& f)
{
    std::string path = f.config;
    if (path.empty()) {
        if (const char* env = std::getenv("ECX_CONFIG")) path = env;
    }
    auto cfg = path.empty() ? ecx::RunConfig{} : ecx::load_config(path);

    if (!f.out.empty()) cfg.out = f.out;
    if (f.jobs != 0) cfg.jobs = f.jobs;
    if (f.verbose) cfg.verbose = true;
    if (!f.inputs.empty()) {
        cfg.inputs.clear();
        for (const auto& p : f.inputs) cfg.inputs.push_back({p, std::nullopt});
    }
    if (!f.geo_crosswalk.empty()) cfg.geo_crosswalk = f.geo_crosswalk;
    if (!f.industry_crosswalk.empty()) cfg.industry_crosswalk = f.industry_crosswalk;
    if (!f.size_classes.empty()) cfg.size_classes = f.size_classes;
    if (!f.attributes.empty()) cfg.attributes = f.attributes;
    if (!f.panel.empty()) cfg.panel = f.panel;
    if (!f.data.empty()) cfg.regression_data = f.data;
    if (!f.geography.empty()) cfg.geography = f.geography;
    if (!f.industry_level.empty()) cfg.industry_level = f.industry_level;
    if (!f.years.empty()) cfg.years = f.years;
    if (!f.strategies.empty()) {
        cfg.strategies.clear();
        for (const auto& s : f.strategies) cfg.strategies.push_back(ecx::parse_strategy(s));
    }
    if (!f.indices.empty()) {
        cfg.indices.clear();
        for (const auto& s : f.indices) cfg.indices.push_back(ecx::parse_index_kind(s));
    }
    if (f.cutoff) cfg.strategy_params.cutoff = *f.cutoff;
    if (f.tol) cfg.fitness.tol = *f.tol;
    if (f.max_iter) cfg.fitness.max_iter = *f.max_iter;
    if (!f.heatmap_format.empty()) cfg.heatmap_format = ecx::parse_heatmap_format(f.heatmap_format);
    if (f.top_n) cfg.top_n = *f.top_n;

    auto& s = cfg.synth;
    if (!f.synth_kind.empty()) s.kind = f.synth_kind;
    if (f.regions) s.regions = *f.regions;
    if (f.industries) s.industries = *f.industries;
    if (f.capabilities) s.capabilities = *f.capabilities;
    if (f.p_region) s.p_region = *f.p_region;
    if (f.p_industry) s.p_industry = *f.p_industry;
    if (f.seed) s.seed = *f.seed;
    if (f.synth_panel) s.write_panel = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Regional economic complexity: ingest, compute, diagnose, regress, synth"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "JSON run config (default: $ECX_CONFIG)");
    app.add_option("--out", f.out, "Output directory");
    app.add_option("--jobs", f.jobs, "Concurrent compute jobs")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", f.verbose, "Progress messages on stderr");

    auto* ingest = app.add_subcommand("ingest", "Parse employment tables, impute suppressed cells, aggregate");
    ingest->add_option("--input", f.inputs, "Employment table(s)");
    ingest->add_option("--geo-crosswalk", f.geo_crosswalk, "County to CBSA crosswalk");
    ingest->add_option("--industry-crosswalk", f.industry_crosswalk, "Industry to cluster crosswalk");
    ingest->add_option("--size-classes", f.size_classes, "Size-class table (flag,lower,upper,imputed)");
    ingest->add_option("--geography", f.geography, "county | cbsa_plus_counties");
    ingest->add_option("--industry-level", f.industry_level, "naics2..naics6 | bcd_subcluster");

    auto* compute = app.add_subcommand("compute", "Score files for every year x strategy x index");
    auto* diagnose = app.add_subcommand("diagnose", "Heatmaps, correlations, group summaries, rankings");
    for (auto* sub : {compute, diagnose}) {
        sub->add_option("--panel", f.panel, "Panel file (default <out>/panel.csv)");
        sub->add_option("--years", f.years, "Years to process");
        sub->add_option("--strategies", f.strategies, "BM RLQ WM Presence CM");
        sub->add_option("--indices", f.indices, "eci fi");
        sub->add_option("--cutoff", f.cutoff, "CM employment cutoff");
    }
    compute->add_option("--tol", f.tol, "Fitness convergence tolerance");
    compute->add_option("--max-iter", f.max_iter, "Fitness iteration cap");
    diagnose->add_option("--format", f.heatmap_format, "Heatmap format: svg | csv");
    diagnose->add_option("--top-n", f.top_n, "Rows in top/bottom tables");
    diagnose->add_option("--attributes", f.attributes, "Attribute table (code,attribute,value)");

    auto* regress = app.add_subcommand("regress", "Regression tables from the configured models");
    regress->add_option("--data", f.data, "Regression dataset (entity,year,...)");

    auto* synth = app.add_subcommand("synth", "Synthetic nested or capability-model matrices");
    synth->add_option("--kind", f.synth_kind, "nested | capability");
    synth->add_option("--regions", f.regions, "Regions");
    synth->add_option("--industries", f.industries, "Industries");
    synth->add_option("--capabilities", f.capabilities, "Capabilities (capability model)");
    synth->add_option("--p-region", f.p_region, "P(region holds a capability)");
    synth->add_option("--p-industry", f.p_industry, "P(industry needs a capability)");
    synth->add_option("--seed", f.seed, "RNG seed");
    synth->add_flag("--panel", f.synth_panel, "Also write <out>/panel.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ecx::kExitInvalid;
    }

    ecx::RunConfig cfg;
    try {
        cfg = effective_config(f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ecx::kExitInvalid;
    }
    return ecx::run_command(app.get_subcommands().front()->get_name(), cfg, std::cerr);
}
