#include "itr/synth.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "itr/rng.hpp"
#include "itr/transform.hpp"

namespace itr {

namespace {

Eigen::VectorXd point2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

std::vector<Eigen::VectorXd> grid_pm1_squared() {
  return {point2(-1, -1), point2(-1, 1), point2(1, -1), point2(1, 1)};
}

/// Arm-by-sign(w1) hazard with exact constants: the favored arm has hazard
/// 0.2, the other 0.5, so theta_0(w) = +-0.3 with restriction time 2.
double hazard_a(int /*m*/, int a, const Eigen::VectorXd& w) {
  const bool treated_better = w[0] > 0;
  if (a == 1) return treated_better ? 0.2 : 0.5;
  return treated_better ? 0.5 : 0.2;
}

SynthDgp make_dgp_a() {
  SynthDgp d;
  d.name = "a";
  d.k_max = 2;
  d.tau = 2;
  d.p = 2;
  d.discrete_w = true;
  d.w_grid = grid_pm1_squared();
  d.w_prob = {0.25, 0.25, 0.25, 0.25};
  d.h0 = hazard_a;
  d.gr0 = [](int, int, const Eigen::VectorXd&) { return 0.0; };
  d.ga1 = [](const Eigen::VectorXd&) { return 0.5; };
  d.margin = SynthDgp::Margin::bounded_away;
  d.margin_c = 0.3;
  return d;
}

SynthDgp make_dgp_b() {
  SynthDgp d = make_dgp_a();
  d.name = "b";
  d.gr0 = [](int, int, const Eigen::VectorXd& w) { return expit(-2.0 + 0.5 * w[1]); };
  return d;
}

SynthDgp make_dgp_k3() {
  SynthDgp d;
  d.name = "k3";
  d.k_max = 3;
  d.tau = 3;
  d.p = 2;
  d.discrete_w = true;
  d.w_grid = grid_pm1_squared();
  d.w_prob = {0.25, 0.25, 0.25, 0.25};
  d.h0 = [](int m, int a, const Eigen::VectorXd& w) {
    return expit(-1.1 + 0.25 * m + 0.6 * w[0] * (2.0 * a - 1.0) - 0.2 * w[1]);
  };
  d.gr0 = [](int m, int a, const Eigen::VectorXd& w) {
    return expit(-2.2 + 0.3 * a + 0.15 * m - 0.2 * w[0]);
  };
  d.ga1 = [](const Eigen::VectorXd& w) { return expit(0.4 * w[0] - 0.2 * w[1]); };
  d.margin = SynthDgp::Margin::none;
  return d;
}

SynthDgp make_dgp_a_cont() {
  SynthDgp d = make_dgp_a();
  d.name = "a_cont";
  d.discrete_w = false;
  d.w_grid.clear();
  d.w_prob.clear();
  d.w_lo = point2(-1, -1);
  d.w_hi = point2(1, 1);
  return d;
}

SynthDgp make_dgp_null() {
  SynthDgp d = make_dgp_a();
  d.name = "null";
  d.h0 = [](int, int, const Eigen::VectorXd&) { return 0.3; };
  d.margin = SynthDgp::Margin::none;
  d.margin_c = 0.0;
  return d;
}

/// Smooth blip crossing zero at w1 = 0 (no margin): the weakest-margin
/// counterpart of "a_cont" for rate experiments.
SynthDgp make_dgp_smooth() {
  SynthDgp d = make_dgp_a_cont();
  d.name = "smooth";
  d.h0 = [](int, int a, const Eigen::VectorXd& w) {
    return expit(-0.6931471805599453 * (1.0 + w[0] * (2.0 * a - 1.0)));
  };
  d.margin = SynthDgp::Margin::none;
  d.margin_c = 0.0;
  return d;
}

}  // namespace

const SynthDgp& dgp_by_name(const std::string& name) {
  static const std::map<std::string, SynthDgp> registry = [] {
    std::map<std::string, SynthDgp> r;
    for (SynthDgp d : {make_dgp_a(), make_dgp_b(), make_dgp_k3(), make_dgp_a_cont(),
                       make_dgp_null(), make_dgp_smooth()}) {
      validate_dgp(d);
      r.emplace(d.name, std::move(d));
    }
    return r;
  }();
  const auto it = registry.find(name);
  if (it == registry.end()) {
    std::string known;
    for (const auto& [key, value] : registry) known += (known.empty() ? "" : ", ") + key;
    throw std::invalid_argument("unknown process '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

std::vector<std::string> dgp_names() { return {"a", "a_cont", "b", "k3", "null", "smooth"}; }

namespace {

void check_probability(double v, double lo, double hi, const std::string& what) {
  if (std::isnan(v) || v < lo || v > hi) {
    throw std::invalid_argument("process invalid: " + what + " = " + std::to_string(v));
  }
}

void validate_at(const SynthDgp& d, const Eigen::VectorXd& w) {
  const double eps = 1e-3;
  check_probability(d.ga1(w), eps, 1.0 - eps, "P(A=1|w)");
  for (int a = 0; a < 2; ++a) {
    for (int m = 1; m <= d.k_max; ++m) {
      check_probability(d.h0(m, a, w), 0.0, 1.0, "event hazard");
    }
    for (int m = 0; m <= d.k_max - 1; ++m) {
      check_probability(d.gr0(m, a, w), 0.0, 1.0 - eps, "censoring hazard");
    }
  }
}

}  // namespace

void validate_dgp(const SynthDgp& dgp) {
  if (dgp.k_max < 1) throw std::invalid_argument("process invalid: horizon < 1");
  if (dgp.tau < 1 || dgp.tau > dgp.k_max) {
    throw std::invalid_argument("process invalid: restriction time outside horizon");
  }
  if (dgp.discrete_w) {
    if (dgp.w_grid.empty() || dgp.w_grid.size() != dgp.w_prob.size()) {
      throw std::invalid_argument("process invalid: grid/probability mismatch");
    }
    double total = 0.0;
    for (double q : dgp.w_prob) {
      if (!(q > 0.0)) throw std::invalid_argument("process invalid: nonpositive grid mass");
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("process invalid: grid masses must sum to one");
    }
    for (const auto& w : dgp.w_grid) validate_at(dgp, w);
  } else {
    if (dgp.w_lo.size() != dgp.p || dgp.w_hi.size() != dgp.p) {
      throw std::invalid_argument("process invalid: box bounds dimension mismatch");
    }
    // Spot-check corners and the center of the box.
    Eigen::VectorXd mid = 0.5 * (dgp.w_lo + dgp.w_hi);
    validate_at(dgp, dgp.w_lo);
    validate_at(dgp, dgp.w_hi);
    validate_at(dgp, mid);
  }
}

namespace {

Eigen::VectorXd draw_w(const SynthDgp& dgp, Rng& rng) {
  if (dgp.discrete_w) {
    const double u = rng.uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i < dgp.w_grid.size(); ++i) {
      cum += dgp.w_prob[i];
      if (u < cum) return dgp.w_grid[i];
    }
    return dgp.w_grid.back();
  }
  Eigen::VectorXd w(dgp.p);
  for (int j = 0; j < dgp.p; ++j) w[j] = rng.uniform(dgp.w_lo[j], dgp.w_hi[j]);
  return w;
}

}  // namespace

Cohort simulate(const SynthDgp& dgp, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  Rng rng(seed);
  std::vector<Subject> subjects;
  subjects.reserve(static_cast<std::size_t>(n));
  // Ids carry a seed tag so cohorts drawn with different seeds never share
  // ids (training/evaluation disjointness checks rely on this).
  char tag[8];
  std::snprintf(tag, sizeof(tag), "%04x", static_cast<unsigned>(mix_seed(seed, 0) & 0xffff));
  for (int i = 0; i < n; ++i) {
    Subject s;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "s%s-%06d", tag, i + 1);
    s.id = buf;
    s.w = draw_w(dgp, rng);
    s.a = rng.bernoulli(dgp.ga1(s.w)) ? 1 : 0;

    // Censoring at 0 precedes the first event opportunity; within each
    // later period the event decision comes first, then censoring.
    s.delta = 0;
    s.t_tilde = dgp.k_max;
    if (rng.bernoulli(dgp.gr0(0, s.a, s.w))) {
      s.t_tilde = 0;
    } else {
      for (int m = 1; m <= dgp.k_max; ++m) {
        if (rng.bernoulli(dgp.h0(m, s.a, s.w))) {
          s.delta = 1;
          s.t_tilde = m;
          break;
        }
        if (m <= dgp.k_max - 1 && rng.bernoulli(dgp.gr0(m, s.a, s.w))) {
          s.t_tilde = m;
          break;
        }
      }
    }
    subjects.push_back(std::move(s));
  }
  return make_cohort(subjects, dgp.k_max);
}

double true_blip(const SynthDgp& dgp, const Eigen::VectorXd& w) {
  double total = 0.0;
  double s1 = 1.0, s0 = 1.0;
  for (int t = 1; t <= dgp.tau - 1; ++t) {
    s1 *= 1.0 - dgp.h0(t, 1, w);
    s0 *= 1.0 - dgp.h0(t, 0, w);
    total += s1 - s0;
  }
  return total;
}

double true_value(const SynthDgp& dgp,
                  const std::function<int(const Eigen::VectorXd&)>& rule) {
  if (dgp.discrete_w) {
    double v = 0.0;
    for (std::size_t i = 0; i < dgp.w_grid.size(); ++i) {
      if (rule(dgp.w_grid[i]) == 1) v += dgp.w_prob[i] * true_blip(dgp, dgp.w_grid[i]);
    }
    return v;
  }
  // Monte Carlo over the covariate box with a fixed stream; batches grow
  // until the standard error of the mean drops below 1e-3.
  Rng rng(0x5eedful);
  double sum = 0.0, sumsq = 0.0;
  long long count = 0;
  const long long batch = 50000;
  const long long cap = 2000000;
  for (;;) {
    for (long long i = 0; i < batch; ++i) {
      const Eigen::VectorXd w = draw_w(dgp, rng);
      const double x = rule(w) == 1 ? true_blip(dgp, w) : 0.0;
      sum += x;
      sumsq += x * x;
    }
    count += batch;
    const double mean = sum / static_cast<double>(count);
    const double var =
        std::max(sumsq / static_cast<double>(count) - mean * mean, 0.0);
    const double se = std::sqrt(var / static_cast<double>(count));
    if (se < 1e-3 || count >= cap) return mean;
  }
}

double optimal_value(const SynthDgp& dgp) {
  return true_value(dgp, [&](const Eigen::VectorXd& w) {
    return true_blip(dgp, w) > 0.0 ? 1 : 0;
  });
}

namespace {

/// Probability of each (delta, t_tilde) path given (a, w) under the
/// sequential factorization of the process.
std::vector<std::pair<double, std::pair<int, int>>> path_distribution(
    const SynthDgp& dgp, int a, const Eigen::VectorXd& w) {
  std::vector<std::pair<double, std::pair<int, int>>> out;
  const int k = dgp.k_max;
  double alive = 1.0;  // P(no event, no censoring so far)

  const double c0 = dgp.gr0(0, a, w);
  out.push_back({c0, {0, 0}});
  alive *= 1.0 - c0;

  for (int m = 1; m <= k; ++m) {
    const double hm = dgp.h0(m, a, w);
    out.push_back({alive * hm, {1, m}});
    alive *= 1.0 - hm;
    if (m <= k - 1) {
      const double cm = dgp.gr0(m, a, w);
      out.push_back({alive * cm, {0, m}});
      alive *= 1.0 - cm;
    }
  }
  out.push_back({alive, {0, k}});  // administrative end of follow-up
  return out;
}

}  // namespace

double exhaustive_conditional_mean_D(const SynthDgp& dgp, const NuisanceSet& eta,
                                     const Eigen::VectorXd& w) {
  if (dgp.k_max > 3) {
    throw std::invalid_argument("exhaustive enumeration requires horizon <= 3");
  }
  double total = 0.0;
  for (int a = 0; a < 2; ++a) {
    const double pa = a == 1 ? dgp.ga1(w) : 1.0 - dgp.ga1(w);
    for (const auto& [prob, path] : path_distribution(dgp, a, w)) {
      if (prob == 0.0) continue;
      Subject s;
      s.id = "enumerated";
      s.w = w;
      s.a = a;
      s.delta = path.first;
      s.t_tilde = path.second;
      total += pa * prob * dr_transform(s, eta, dgp.tau).d;
    }
  }
  return total;
}

std::vector<PopulationAtom> enumerate_population(const SynthDgp& dgp, const NuisanceSet& eta) {
  if (!dgp.discrete_w) {
    throw std::invalid_argument("population enumeration requires a covariate grid");
  }
  if (dgp.k_max > 3) {
    throw std::invalid_argument("population enumeration requires horizon <= 3");
  }
  std::vector<PopulationAtom> atoms;
  for (std::size_t i = 0; i < dgp.w_grid.size(); ++i) {
    const Eigen::VectorXd& w = dgp.w_grid[i];
    for (int a = 0; a < 2; ++a) {
      const double pa = a == 1 ? dgp.ga1(w) : 1.0 - dgp.ga1(w);
      for (const auto& [prob, path] : path_distribution(dgp, a, w)) {
        const double mass = dgp.w_prob[i] * pa * prob;
        if (mass == 0.0) continue;
        Subject s;
        s.id = "enumerated";
        s.w = w;
        s.a = a;
        s.delta = path.first;
        s.t_tilde = path.second;
        atoms.push_back({static_cast<int>(i), mass, dr_transform(s, eta, dgp.tau).d});
      }
    }
  }
  return atoms;
}

}  // namespace itr
