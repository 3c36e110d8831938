#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "itr/cohort.hpp"
#include "itr/nuisance.hpp"

namespace itr {

/// Survival and censoring-survivor curves at one (a, w), on t = 0,...,tau-1.
/// s[0] = g_cum[0] = 1 by the empty-product convention; both non-increasing.
struct SurvivalCurves {
  Eigen::VectorXd s;      // S(t, a, w) = prod_{m=1}^{t} (1 - h(m, a, w))
  Eigen::VectorXd g_cum;  // G(t, a, w) = prod_{m=0}^{t-1} (1 - g_R(m, a, w))
};

/// Event survival S(0..tau-1); throws if any hazard leaves [0,1].
Eigen::VectorXd survival_from_hazard(const HazardModel& h, int tau, int a,
                                     const Eigen::VectorXd& w);

/// Censoring survivor G(0..tau-1); the product index starts at m = 0.
Eigen::VectorXd censoring_survivor(const HazardModel& g_r, int tau, int a,
                                   const Eigen::VectorXd& w);

SurvivalCurves survival_curves(const NuisanceSet& eta, int tau, int a, const Eigen::VectorXd& w);

/// sum_{t=1}^{tau-1} { S(t,1,w) - S(t,0,w) }; zero when tau = 1.
double blip_value(const HazardModel& h, int tau, const Eigen::VectorXd& w);

/// One subject's transformation value with its decomposition. d recomposes
/// bit-exactly as the ordered sum of (augmentation[m] + plugin[m]).
struct DrValue {
  std::string subject_id;
  double d = 0.0;
  Eigen::VectorXd augmentation;  // index m-1, m = 1..tau-1
  Eigen::VectorXd plugin;
};

/// Doubly robust censoring unbiased transformation. The inner survival
/// ratio S(t,a,w)/S(m,a,w) is formed as the product of (1 - h) over
/// k = m+1..t (cancel before dividing), which is exact at t = m and keeps
/// the h = 1 inverse-weighting special case finite.
DrValue dr_transform(const Subject& s, const NuisanceSet& eta, int tau);

std::vector<DrValue> dr_transform_all(const Cohort& c, const NuisanceSet& eta, int tau);

/// | prod(1-a) - prod(1-b) - sum_t prod_{k<t}(1-a_k) (b_t - a_t)
///   prod_{k>t}(1-b_k) |, a test helper for the product-difference identity.
double telescoping_residual(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Diagnostic dump: subject_id, m, augmentation_m, plugin_m, d.
void write_dr_terms_csv(const std::vector<DrValue>& values, const std::string& path);

}  // namespace itr
