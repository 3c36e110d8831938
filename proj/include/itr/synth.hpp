#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "itr/cohort.hpp"
#include "itr/nuisance.hpp"

namespace itr {

/// A synthetic data-generating process with closed-form truth. Covariates
/// are either a finite grid with point masses or a uniform box. Hazards,
/// censoring hazards, and the treatment mechanism are plain functions, so
/// blips, values, and small-horizon path enumerations are exact.
struct SynthDgp {
  enum class Margin { none, bounded_away };

  std::string name;
  int k_max = 2;
  int tau = 2;
  int p = 2;

  bool discrete_w = true;
  std::vector<Eigen::VectorXd> w_grid;
  std::vector<double> w_prob;
  Eigen::VectorXd w_lo, w_hi;  // uniform box when continuous

  std::function<double(int, int, const Eigen::VectorXd&)> h0;   // event hazard
  std::function<double(int, int, const Eigen::VectorXd&)> gr0;  // censoring hazard
  std::function<double(const Eigen::VectorXd&)> ga1;            // P(A=1|w)

  Margin margin = Margin::none;
  double margin_c = 0.0;  // |theta0| >= margin_c when bounded away
};

/// Registered reference processes:
///   "a"      4-point grid, no censoring, blip +-0.3 by sign(w1)
///   "b"      as "a" with covariate-dependent censoring
///   "k3"     three-period process with censoring and a covariate-driven
///            treatment mechanism (exercises every time index)
///   "a_cont" as "a" with W uniform on [-1,1]^2 (margin still 0.3)
///   "null"   identical arms, blip identically zero
const SynthDgp& dgp_by_name(const std::string& name);
std::vector<std::string> dgp_names();

/// Positivity and probability-range checks; throws on violation.
void validate_dgp(const SynthDgp& dgp);

/// Forward simulation of n subjects; deterministic per seed.
Cohort simulate(const SynthDgp& dgp, int n, std::uint64_t seed);

/// Exact blip theta_0(w) from the product formula.
double true_blip(const SynthDgp& dgp, const Eigen::VectorXd& w);

/// Value E{rule(W) theta_0(W)}: exact sums on grids, Monte Carlo with
/// standard error below 1e-3 on continuous covariates (fixed inner seed).
double true_value(const SynthDgp& dgp, const std::function<int(const Eigen::VectorXd&)>& rule);

/// Value of the optimal rule 1{theta_0 > 0}.
double optimal_value(const SynthDgp& dgp);

/// Exact conditional mean of the transformation given W = w by exhaustive
/// enumeration of every (arm, path) outcome; requires k_max <= 3.
double exhaustive_conditional_mean_D(const SynthDgp& dgp, const NuisanceSet& eta,
                                     const Eigen::VectorXd& w);

/// One observable outcome of a discrete process: probability mass, its
/// transformation value under eta, and the covariate grid index.
struct PopulationAtom {
  int w_index = 0;
  double prob = 0.0;
  double d = 0.0;
};

/// Full outcome enumeration for discrete processes with k_max <= 3.
std::vector<PopulationAtom> enumerate_population(const SynthDgp& dgp, const NuisanceSet& eta);

}  // namespace itr
