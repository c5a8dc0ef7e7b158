#pragma once

#include "ecx/catalog.hpp"
#include "ecx/matrix.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ecx {

// Diversity k_{r,0} (row sums) and ubiquity k_{i,0} (column sums). Weighted matrices give
// weighted degrees.
struct DegreeVectors {
    Eigen::VectorXd diversity;
    Eigen::VectorXd ubiquity;
};

// Throws DegenerateError if the matrix has an all-zero row or column (run prune_empty first).
DegreeVectors degrees(const Eigen::MatrixXd& m);

// Method-of-reflections iterates. region[N] is k_{r,N}, industry[N] is k_{i,N}, N = 0..n_max:
//   k_{r,N} = (1/k_{r,0}) sum_i M_{r,i} k_{i,N-1}
//   k_{i,N} = (1/k_{i,0}) sum_r M_{r,i} k_{r,N-1}
// so that k_{r,N} = sum_{r'} Mt_{r,r'} k_{r',N-2} with Mt_{r,r'} = sum_i M_{r,i} M_{r',i} / (k_{r,0} k_{i,0}).
struct ReflectionsTrace {
    std::vector<Eigen::VectorXd> region;
    std::vector<Eigen::VectorXd> industry;
};

ReflectionsTrace method_of_reflections(const Eigen::MatrixXd& m, int n_max);

// Region-side row-stochastic matrix Mt_{r,r'} (dense; for tests and small problems).
Eigen::MatrixXd region_transition(const Eigen::MatrixXd& m);

enum class IndexKind { ECI, FI };
std::string_view to_string(IndexKind k);
IndexKind parse_index_kind(std::string_view name);

struct Convergence {
    bool converged = true;
    int iterations = 0;
    double residual = 0;
    // eigen: "dense-eigensolver" or "power-iteration"; fitness: "fixed-point"
    std::string solver;
    // ECI only: the two leading nontrivial eigenvalues of Mt.
    double second_eigenvalue = 0;
    double third_eigenvalue = 0;
    // FI only: largest |mean(F) - 1| and |mean(Q) - 1| seen after any iteration.
    double max_mean_deviation = 0;
};

struct ComplexityScores {
    IndexKind kind = IndexKind::ECI;
    std::optional<Strategy> strategy;
    std::optional<int> year;
    Catalog regions;
    Catalog industries;
    Eigen::VectorXd region_scores;
    Eigen::VectorXd industry_scores;
    Convergence convergence;
    std::vector<std::string> warnings;
};

struct EciOptions {
    // Up to this many rows (per side) the dense symmetric eigensolver is used,
    // above it power iteration with the trivial eigenvector deflated.
    Eigen::Index dense_limit = 2000;
    double power_tol = 1e-10;
    int power_max_iter = 10000;
    // Relative eigenvalue gap below which the second eigenvector counts as non-unique.
    double degeneracy_tol = 1e-9;
};

// Economic Complexity Index. Region scores: standardized (mean 0, population sd 1)
// eigenvector of Mt for its second-largest eigenvalue, signed to covary nonnegatively with
// diversity. Industry scores: same construction on the transposed matrix, signed to covary
// nonnegatively with -ubiquity.
// Throws DegenerateError for fewer than two regions/industries or a degenerate spectrum.
ComplexityScores eci(const Eigen::MatrixXd& m, const EciOptions& options = {});
ComplexityScores eci(const InputMatrix& m, const EciOptions& options = {});

struct FitnessOptions {
    int max_iter = 1000;
    double tol = 1e-8;
};

// Fitness / complexity fixed point, from F = Q = 1:
//   F~_r = sum_i M_{r,i} Q_i,   Q~_i = 1 / sum_r M_{r,i} / F_r
// both divided by their mean each step. Stops when the largest relative change of any F_r
// or Q_i is below tol. Non-convergence is reported, not thrown. Values that would leave the
// normal double range (fitnesses decaying to zero) stop the iteration at the last
// representable iterate with a warning; NaN throws NumericError.
ComplexityScores fitness(const Eigen::MatrixXd& m, const FitnessOptions& options = {});
ComplexityScores fitness(const InputMatrix& m, const FitnessOptions& options = {});

// (x - mean) / population sd. Throws NumericError on zero variance.
Eigen::VectorXd standardize(const Eigen::VectorXd& x);

// Scores as delimited text: side,code,score (side is "region" or "industry").
std::string scores_csv(const ComplexityScores& s);
std::string scores_metadata_json(const ComplexityScores& s);
// Reads scores_csv output back (catalog order preserved).
ComplexityScores parse_scores_csv(std::string_view text);

}  // namespace ecx
