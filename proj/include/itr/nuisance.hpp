#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "itr/cohort.hpp"
#include "itr/folds.hpp"
#include "itr/learners.hpp"

namespace itr {

struct SynthDgp;  // synth module

/// Conditional discrete hazard surface (m, a, w) -> probability. Fitted
/// models clip predictions into [clip_eps, 1 - clip_eps]; exact
/// constructions (oracles, the inverse-weighting special case) set
/// clip_eps = 0 and may return the boundary.
struct HazardModel {
  HazardKind kind = HazardKind::event;
  std::function<double(int, int, const Eigen::VectorXd&)> fn;
  double clip_eps = 0.0;
  std::string tag;  // provenance, e.g. fitted-on fold

  double operator()(int m, int a, const Eigen::VectorXd& w) const {
    const double p = fn(m, a, w);
    return clip_eps > 0.0 ? clamp_prob(p, clip_eps) : p;
  }
};

/// Treatment mechanism (a, w) -> g_A(a, w). Fitted models derive both arms
/// from P(A = 1 | W = w); special cases (g-computation sets g_A = 1 for
/// either arm) supply the two-argument form directly.
struct PropensityModel {
  std::function<double(int, const Eigen::VectorXd&)> fn;
  double clip_eps = 0.0;
  std::string tag;

  double prob(int a, const Eigen::VectorXd& w) const {
    const double p = fn(a, w);
    return clip_eps > 0.0 ? clamp_prob(p, clip_eps) : p;
  }
  double prob1(const Eigen::VectorXd& w) const { return prob(1, w); }

  static std::function<double(int, const Eigen::VectorXd&)> from_p1(
      std::function<double(const Eigen::VectorXd&)> p1) {
    return [p1 = std::move(p1)](int a, const Eigen::VectorXd& w) {
      const double p = p1(w);
      return a == 1 ? p : 1.0 - p;
    };
  }
};

struct NuisanceWeightEntry {
  std::string component;  // "h" or "g_r"
  int arm = 0;
  std::string learner;
  double weight = 0.0;
};

/// The nuisance bundle eta = (h, g_A, g_R), plus the fitted ensemble
/// weight table when it came from the super learner.
struct NuisanceSet {
  HazardModel h;
  PropensityModel g_a;
  HazardModel g_r;
  std::vector<NuisanceWeightEntry> weight_table;
  std::string id;
};

/// Pooled person-period fit of one hazard learner. GLM families encode
/// time as categorical indicators (baseline absorbed); stump boosting
/// treats time as numeric. Arm terms enter only when the table carries
/// both arms. Predictions are clipped to [eps_clip, 1 - eps_clip].
HazardModel fit_pooled_hazard(const Cohort& c, const RiskSetTable& table,
                              const LearnerSpec& spec, double eps_clip);

/// Logistic (or marginal, or boosted) fit of P(A = 1 | W). Throws when the
/// cohort has a single arm.
PropensityModel fit_propensity(const Cohort& c, const LearnerSpec& spec, double eps_clip);

/// Ranks covariates by absolute two-sample Welch t-statistic between y = 1
/// and y = 0 rows of the table; returns the top `keep` indices in rank
/// order (ties to the lower index; zero-variance columns score 0).
std::vector<int> screen_covariates(const Cohort& c, const RiskSetTable& table, int keep);

/// Per-arm super learner for h and g_R over the learner library: internal
/// cross-validated Bernoulli log-likelihood picks simplex weights, every
/// learner is refit on the full training data, and the blend is clipped.
/// g_A is fit on the whole sample with `propensity_spec`.
NuisanceSet fit_nuisance_superlearner(const Cohort& train, const std::vector<LearnerSpec>& specs,
                                      const FoldPlan& folds, int tau, double eps_clip,
                                      const LearnerSpec& propensity_spec);

/// Exact nuisance functions of a synthetic process.
NuisanceSet make_oracle_nuisance(const SynthDgp& dgp);

enum class Corruption { h, g };

/// Replaces one component with a fixed wrong-but-valid function: h -> 1/2
/// everywhere, or (g_A, g_R) -> (1/2, 1/10); the other stays exact.
NuisanceSet make_corrupted_nuisance(const SynthDgp& dgp, Corruption which);

/// Both components corrupted (the configuration that must fail).
NuisanceSet make_double_corrupted_nuisance(const SynthDgp& dgp);

/// Inverse-probability-weighting special case: h identically one, g exact.
NuisanceSet make_ipw_nuisance(const SynthDgp& dgp);

/// g-computation special case: g_A identically one, g_R identically zero,
/// h exact.
NuisanceSet make_gcomp_nuisance(const SynthDgp& dgp);

}  // namespace itr
