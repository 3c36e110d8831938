#include "itr/transform.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "itr/csv.hpp"

namespace itr {

namespace {

double checked_hazard(const HazardModel& h, int m, int a, const Eigen::VectorXd& w) {
  const double v = h(m, a, w);
  if (!(v >= 0.0) || !(v <= 1.0)) {
    throw std::runtime_error("hazard value " + std::to_string(v) + " at (m=" +
                             std::to_string(m) + ", a=" + std::to_string(a) +
                             ") lies outside [0,1]");
  }
  return v;
}

}  // namespace

Eigen::VectorXd survival_from_hazard(const HazardModel& h, int tau, int a,
                                     const Eigen::VectorXd& w) {
  if (tau < 1) throw std::invalid_argument("restriction time must be >= 1");
  Eigen::VectorXd s(tau);
  s[0] = 1.0;
  for (int t = 1; t <= tau - 1; ++t) {
    s[t] = s[t - 1] * (1.0 - checked_hazard(h, t, a, w));
  }
  return s;
}

Eigen::VectorXd censoring_survivor(const HazardModel& g_r, int tau, int a,
                                   const Eigen::VectorXd& w) {
  if (tau < 1) throw std::invalid_argument("restriction time must be >= 1");
  Eigen::VectorXd g(tau);
  g[0] = 1.0;
  for (int t = 1; t <= tau - 1; ++t) {
    g[t] = g[t - 1] * (1.0 - checked_hazard(g_r, t - 1, a, w));
  }
  return g;
}

SurvivalCurves survival_curves(const NuisanceSet& eta, int tau, int a,
                               const Eigen::VectorXd& w) {
  SurvivalCurves out;
  out.s = survival_from_hazard(eta.h, tau, a, w);
  out.g_cum = censoring_survivor(eta.g_r, tau, a, w);
  return out;
}

double blip_value(const HazardModel& h, int tau, const Eigen::VectorXd& w) {
  const Eigen::VectorXd s1 = survival_from_hazard(h, tau, 1, w);
  const Eigen::VectorXd s0 = survival_from_hazard(h, tau, 0, w);
  double total = 0.0;
  for (int t = 1; t <= tau - 1; ++t) total += s1[t] - s0[t];
  return total;
}

DrValue dr_transform(const Subject& s, const NuisanceSet& eta, int tau) {
  if (tau < 1) throw std::invalid_argument("restriction time must be >= 1");
  DrValue out;
  out.subject_id = s.id;
  out.augmentation = Eigen::VectorXd::Zero(std::max(tau - 1, 0));
  out.plugin = Eigen::VectorXd::Zero(std::max(tau - 1, 0));
  if (tau == 1) return out;

  const Eigen::VectorXd s1 = survival_from_hazard(eta.h, tau, 1, s.w);
  const Eigen::VectorXd s0 = survival_from_hazard(eta.h, tau, 0, s.w);
  const int arm = s.a;

  // Own-arm hazards h(m, A, w) for the residual and the survival ratios.
  Eigen::VectorXd h_own(tau);
  for (int m = 1; m <= tau - 1; ++m) h_own[m] = checked_hazard(eta.h, m, arm, s.w);

  // tail[m] = sum_{t=m}^{tau-1} prod_{k=m+1}^{t} (1 - h(k, A, w)); the
  // empty product at t = m contributes exactly 1.
  Eigen::VectorXd tail(tau);
  tail[tau - 1] = 1.0;
  for (int m = tau - 2; m >= 1; --m) {
    tail[m] = 1.0 + (1.0 - h_own[m + 1]) * tail[m + 1];
  }

  const Eigen::VectorXd g_own = censoring_survivor(eta.g_r, tau, arm, s.w);
  const double ga_own = eta.g_a.prob(arm, s.w);
  if (!(ga_own > 0.0)) {
    throw std::runtime_error("subject " + s.id + ": treatment probability is not positive");
  }

  for (int m = 1; m <= tau - 1; ++m) {
    const bool at_risk = s.t_tilde >= m;  // administrative censoring stays at risk
    double aug = 0.0;
    if (at_risk) {
      const double l_m = (s.delta == 1 && s.t_tilde == m) ? 1.0 : 0.0;
      // Z(m, A, W): only the observed arm's term survives the indicator;
      // the G factor is evaluated at the outer index m.
      const double z = (arm == 1 ? -1.0 : 1.0) * tail[m] / (ga_own * g_own[m]);
      aug = z * (l_m - h_own[m]);
    }
    const double plug = s1[m] - s0[m];
    out.augmentation[m - 1] = aug;
    out.plugin[m - 1] = plug;
    out.d += aug + plug;
  }
  return out;
}

std::vector<DrValue> dr_transform_all(const Cohort& c, const NuisanceSet& eta, int tau) {
  std::vector<DrValue> out;
  out.reserve(static_cast<std::size_t>(c.n()));
  for (int i = 0; i < c.n(); ++i) {
    try {
      out.push_back(dr_transform(c.subject(i), eta, tau));
    } catch (const std::exception& e) {
      throw std::runtime_error("transformation failed for subject " +
                               c.ids[static_cast<std::size_t>(i)] + ": " + e.what());
    }
  }
  return out;
}

double telescoping_residual(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("telescoping_residual: length mismatch");
  }
  const Eigen::Index n = a.size();
  double prod_a = 1.0, prod_b = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    prod_a *= 1.0 - a[i];
    prod_b *= 1.0 - b[i];
  }
  double rhs = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    double term = b[t] - a[t];
    for (Eigen::Index k = 0; k < t; ++k) term *= 1.0 - a[k];
    for (Eigen::Index k = t + 1; k < n; ++k) term *= 1.0 - b[k];
    rhs += term;
  }
  return std::abs(prod_a - prod_b - rhs);
}

void write_dr_terms_csv(const std::vector<DrValue>& values, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write transformation dump: " + path);
  out << "subject_id,m,augmentation,plugin,d\n";
  for (const auto& v : values) {
    for (Eigen::Index m = 0; m < v.augmentation.size(); ++m) {
      out << v.subject_id << ',' << (m + 1) << ',' << format_double(v.augmentation[m]) << ','
          << format_double(v.plugin[m]) << ',' << format_double(v.d) << '\n';
    }
  }
}

}  // namespace itr
