#include "ecx/synth.hpp"

#include "ecx/error.hpp"

#include <json.hpp>

#include <cmath>

namespace ecx {

Eigen::MatrixXd generate_nested(Eigen::Index n_regions, Eigen::Index n_industries)
{
    if (n_regions < 1 || n_industries < 1) throw ConfigError("generate_nested needs at least one region and one industry");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_regions, n_industries);
    for (Eigen::Index r = 0; r < n_regions; ++r) {
        // ceil((r+1) * n_industries / n_regions) in integer arithmetic
        const Eigen::Index width = ((r + 1) * n_industries + n_regions - 1) / n_regions;
        m.row(r).head(width).setOnes();
    }
    return m;
}

Eigen::MatrixXd capability_presence(const Eigen::MatrixXd& region_capability, const Eigen::MatrixXd& industry_requirement)
{
    if (region_capability.cols() != industry_requirement.cols()) {
        throw ConfigError("capability and requirement matrices disagree on the number of capabilities");
    }
    // Region r lacks capability c that industry i needs  <=>  req(i,c) * (1 - cap(r,c)) > 0.
    const Eigen::MatrixXd missing = (1.0 - region_capability.array()).matrix() * industry_requirement.transpose();
    return (missing.array() == 0).cast<double>().matrix();
}

CapabilityInstance generate_capability_model(Eigen::Index n_regions, Eigen::Index n_industries,
                                             Eigen::Index n_capabilities, double p_region, double p_industry,
                                             std::uint64_t seed, int max_attempts)
{
    if (n_regions < 1 || n_industries < 1 || n_capabilities < 1) {
        throw ConfigError("capability model dimensions must be positive");
    }
    auto valid_p = [](double p) { return p > 0 && p <= 1; };
    if (!valid_p(p_region) || !valid_p(p_industry)) throw ConfigError("capability probabilities must lie in (0, 1]");
    if (max_attempts < 1) throw ConfigError("max_attempts must be positive");

    PortableRng rng(seed);
    CapabilityInstance inst;
    auto& model = inst.model;
    model.n_regions = n_regions;
    model.n_industries = n_industries;
    model.n_capabilities = n_capabilities;
    model.p_region = p_region;
    model.p_industry = p_industry;
    model.seed = seed;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        model.region_capability.resize(n_regions, n_capabilities);
        model.industry_requirement.resize(n_industries, n_capabilities);
        for (Eigen::Index r = 0; r < n_regions; ++r) {
            for (Eigen::Index c = 0; c < n_capabilities; ++c) model.region_capability(r, c) = rng.bernoulli(p_region);
        }
        for (Eigen::Index i = 0; i < n_industries; ++i) {
            for (Eigen::Index c = 0; c < n_capabilities; ++c) model.industry_requirement(i, c) = rng.bernoulli(p_industry);
        }
        inst.presence = capability_presence(model.region_capability, model.industry_requirement);
        model.attempts = attempt;
        // Non-empty presence means pruning leaves at least one cell.
        if ((inst.presence.array() > 0).any()) return inst;
    }
    throw DegenerateError("capability model produced an empty presence matrix in " + std::to_string(max_attempts) +
                          " attempts");
}

std::string capability_model_json(const CapabilityModel& model)
{
    nlohmann::ordered_json j;
    j["generator"] = "capability_model";
    j["rng"] = "mt19937_64, uniform = (x >> 11) * 2^-53, bernoulli = uniform < p";
    j["seed"] = model.seed;
    j["attempts"] = model.attempts;
    j["n_regions"] = model.n_regions;
    j["n_industries"] = model.n_industries;
    j["n_capabilities"] = model.n_capabilities;
    j["p_region"] = model.p_region;
    j["p_industry"] = model.p_industry;
    return j.dump(2) + "\n";
}

}  // namespace ecx
