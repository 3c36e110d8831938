#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "itr/cvrisk.hpp"

namespace itr {

enum class Normalization { simplex, cone_normalized };

/// Library weights with solver provenance. `achieved_risk` is the
/// cross-validated risk of the returned alpha under the loss that was
/// minimized; it never exceeds the risk of any single candidate.
struct EnsembleWeights {
  Eigen::VectorXd alpha;
  Normalization normalization = Normalization::simplex;
  double achieved_risk = 0.0;
  int iterations = 0;
  int restarts = 0;
  double runner_up_gap = 0.0;  // risk margin to the best alternative seen
};

/// Euclidean projection onto {a >= 0, sum a = 1} by sort and threshold.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

/// Simplex-constrained weighted least squares by projected gradient with
/// Armijo backtracking from the uniform start. Stops when the unit-step
/// projected-gradient displacement drops below 1e-9 (or 10,000 iterations).
EnsembleWeights solve_quadratic_weights(const CvMatrix& m);

/// Weighted 0-1 loss minimization: exhaustive simplex grid when J <= 3,
/// plus the J vertices, plus `restarts` flat-Dirichlet starts refined by
/// cyclic coordinate search with step halving down to 1/grid_resolution.
/// Scale is fixed afterwards by normalizing to sum one (the risk only
/// depends on the direction). Equal-risk candidates resolve to the
/// lexicographically smallest normalized weight vector.
EnsembleWeights solve_zeroone_weights(const CvMatrix& m, int restarts, int grid_resolution,
                                      std::uint64_t seed);

/// Convex surrogate minimization over the simplex: projected subgradient
/// (5,000 iterations, step c/sqrt(t), best iterate kept) followed by a
/// deterministic pairwise coordinate polish that certifies the solution to
/// solver tolerance; candidate vertices are evaluated as well.
EnsembleWeights solve_surrogate_weights(const CvMatrix& m, Surrogate phi);

/// Simplex weights minimizing mean Bernoulli negative log-likelihood of
/// the blended probability predictions (columns of `probs`, each within
/// (0,1)). Used by the nuisance super learner.
EnsembleWeights solve_bernoulli_weights(const Eigen::MatrixXd& probs, const Eigen::VectorXd& y);

}  // namespace itr
