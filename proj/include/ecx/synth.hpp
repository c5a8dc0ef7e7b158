#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

namespace ecx {

// Perfectly nested binary matrix: row r (0-based) holds industries 0..ceil((r+1)*n_industries/n_regions)-1,
// so rows are in ascending diversity and columns in descending ubiquity.
Eigen::MatrixXd generate_nested(Eigen::Index n_regions, Eigen::Index n_industries);

// Bernoulli draws from a std::mt19937_64 stream. The engine's output sequence is fixed by
// the C++ standard; the uniform is built from the top 53 bits, so draws are identical
// across standard libraries (std::bernoulli_distribution is not).
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

struct CapabilityModel {
    Eigen::Index n_regions = 0;
    Eigen::Index n_industries = 0;
    Eigen::Index n_capabilities = 0;
    double p_region = 0.5;
    double p_industry = 0.5;
    std::uint64_t seed = 0;
    int attempts = 1;  // draws needed to get a non-degenerate matrix
    Eigen::MatrixXd region_capability;     // n_regions x n_capabilities, 0/1
    Eigen::MatrixXd industry_requirement;  // n_industries x n_capabilities, 0/1

    // Number of capabilities held by each region.
    Eigen::VectorXd capability_counts() const { return region_capability.rowwise().sum(); }
};

struct CapabilityInstance {
    CapabilityModel model;
    Eigen::MatrixXd presence;  // M_{r,i} = 1 iff region r holds every capability industry i needs
};

// Presence by subset coverage for given capability/requirement matrices.
Eigen::MatrixXd capability_presence(const Eigen::MatrixXd& region_capability, const Eigen::MatrixXd& industry_requirement);

// Draws region capabilities ~ Bernoulli(p_region) then industry requirements ~ Bernoulli(p_industry),
// row-major, from one PortableRng(seed). A draw whose presence matrix is empty after pruning is
// redrawn from the continuing stream, up to `max_attempts`; then DegenerateError.
CapabilityInstance generate_capability_model(Eigen::Index n_regions, Eigen::Index n_industries,
                                             Eigen::Index n_capabilities, double p_region, double p_industry,
                                             std::uint64_t seed, int max_attempts = 16);

// JSON sidecar with the model parameters, seed and RNG name.
std::string capability_model_json(const CapabilityModel& model);

}  // namespace ecx
