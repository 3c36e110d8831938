#include "itr/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "itr/learners.hpp"
#include "itr/rng.hpp"

namespace itr {

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index j = v.size();
  if (j == 0) throw std::invalid_argument("project_simplex: empty vector");
  std::vector<double> u(v.data(), v.data() + j);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (Eigen::Index i = 0; i < j; ++i) {
    cumsum += u[static_cast<std::size_t>(i)];
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  (void)rho;
  Eigen::VectorXd out(j);
  for (Eigen::Index i = 0; i < j; ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

namespace {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct PgResult {
  Eigen::VectorXd alpha;
  double value = 0.0;
  int iterations = 0;
};

/// Projected gradient with Armijo backtracking for smooth convex objectives
/// on the simplex.
PgResult minimize_on_simplex(const Objective& f, const Gradient& grad,
                             Eigen::VectorXd start, int max_iter, double pg_tol) {
  Eigen::VectorXd alpha = project_simplex(start);
  double value = f(alpha);
  double step = 1.0;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Eigen::VectorXd g = grad(alpha);
    const Eigen::VectorXd pg = alpha - project_simplex(alpha - g);
    if (pg.norm() < pg_tol) break;

    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      const Eigen::VectorXd trial = project_simplex(alpha - step * g);
      const Eigen::VectorXd delta = trial - alpha;
      const double trial_value = f(trial);
      if (trial_value <= value + 1e-4 * g.dot(delta) + 1e-15) {
        alpha = trial;
        value = trial_value;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step = std::min(step * 2.0, 1e6);
  }
  return {alpha, value, iter};
}

Eigen::VectorXd uniform_start(int j) {
  return Eigen::VectorXd::Constant(j, 1.0 / static_cast<double>(j));
}

Eigen::VectorXd vertex(int j, int index) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(j);
  v[index] = 1.0;
  return v;
}

/// Keeps the better (risk, alpha) pair; ties go to the lexicographically
/// smaller alpha so results do not depend on evaluation order.
bool improves(double risk, const Eigen::VectorXd& alpha, double best_risk,
              const Eigen::VectorXd& best_alpha) {
  if (risk < best_risk) return true;
  if (risk > best_risk) return false;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < best_alpha[i]) return true;
    if (alpha[i] > best_alpha[i]) return false;
  }
  return false;
}

}  // namespace

EnsembleWeights solve_quadratic_weights(const CvMatrix& m) {
  const int j = m.j();
  if (j < 1) throw std::invalid_argument("solve_quadratic_weights: empty library");
  EnsembleWeights out;
  out.normalization = Normalization::simplex;
  if (j == 1) {
    out.alpha = Eigen::VectorXd::Ones(1);
    out.achieved_risk = cv_quadratic_risk(m, out.alpha);
    return out;
  }

  const double n = static_cast<double>(std::max(m.n(), 1));
  const auto f = [&](const Eigen::VectorXd& a) { return cv_quadratic_risk(m, a); };
  const auto grad = [&](const Eigen::VectorXd& a) {
    return Eigen::VectorXd(-2.0 / n * (m.f.transpose() * (m.target - m.f * a)));
  };
  PgResult pg = minimize_on_simplex(f, grad, uniform_start(j), 10000, 1e-9);

  Eigen::VectorXd best = pg.alpha;
  double best_risk = pg.value;
  double runner_up = std::numeric_limits<double>::infinity();
  for (int v = 0; v < j; ++v) {
    const Eigen::VectorXd a = vertex(j, v);
    const double r = cv_quadratic_risk(m, a);
    if (improves(r, a, best_risk, best)) {
      runner_up = best_risk;
      best = a;
      best_risk = r;
    } else {
      runner_up = std::min(runner_up, r);
    }
  }
  out.alpha = best;
  out.achieved_risk = best_risk;
  out.iterations = pg.iterations;
  out.runner_up_gap = std::isfinite(runner_up) ? runner_up - best_risk : 0.0;
  return out;
}

namespace {

/// Incremental weighted 0-1 risk of the cone point with cached scores.
double zeroone_risk_of_scores(const CvMatrix& m, const Eigen::VectorXd& score) {
  double loss = 0.0;
  for (int i = 0; i < m.n(); ++i) {
    const double d = score[i] > 0.0 ? 1.0 : 0.0;
    if (d != m.label[i]) loss += m.weight[i];
  }
  return loss / static_cast<double>(std::max(m.n(), 1));
}

/// Cyclic coordinate search on the nonnegative cone (the 0-1 risk is
/// scale-free, so no normalization is needed while searching). Steps halve
/// from 0.5 down to 1/resolution.
void coordinate_refine(const CvMatrix& m, Eigen::VectorXd& v, double& risk, int resolution) {
  const int j = m.j();
  Eigen::VectorXd score = m.f * v;
  const double min_step = 1.0 / static_cast<double>(resolution);
  for (double step = 0.5; step >= min_step * 0.999; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int c = 0; c < j; ++c) {
        for (const double sign : {+1.0, -1.0}) {
          const double delta = sign * step;
          if (v[c] + delta < 0.0) continue;
          if (v.sum() + delta <= 1e-12) continue;  // keep direction well defined
          const Eigen::VectorXd trial_score = score + delta * m.f.col(c);
          const double trial_risk = zeroone_risk_of_scores(m, trial_score);
          if (trial_risk < risk) {
            v[c] += delta;
            score = trial_score;
            risk = trial_risk;
            improved = true;
          }
        }
      }
    }
  }
}

/// All compositions of `resolution` into j nonnegative parts, visited in
/// lexicographic order.
void for_each_grid_point(int j, int resolution,
                         const std::function<void(const Eigen::VectorXd&)>& fn) {
  Eigen::VectorXd alpha(j);
  std::vector<int> counts(static_cast<std::size_t>(j), 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == j - 1) {
      counts[static_cast<std::size_t>(pos)] = remaining;
      for (int c = 0; c < j; ++c) {
        alpha[c] = static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                   static_cast<double>(resolution);
      }
      fn(alpha);
      return;
    }
    for (int take = 0; take <= remaining; ++take) {
      counts[static_cast<std::size_t>(pos)] = take;
      rec(pos + 1, remaining - take);
    }
  };
  rec(0, resolution);
}

}  // namespace

EnsembleWeights solve_zeroone_weights(const CvMatrix& m, int restarts, int grid_resolution,
                                      std::uint64_t seed) {
  const int j = m.j();
  if (j < 1) throw std::invalid_argument("solve_zeroone_weights: empty library");
  if (restarts < 1) throw std::invalid_argument("solve_zeroone_weights: restarts must be >= 1");
  if (grid_resolution < 1) {
    throw std::invalid_argument("solve_zeroone_weights: grid_resolution must be >= 1");
  }

  EnsembleWeights out;
  out.normalization = Normalization::cone_normalized;
  if (j == 1) {
    out.alpha = Eigen::VectorXd::Ones(1);
    out.achieved_risk = cv_zeroone_risk(m, out.alpha);
    return out;
  }

  double best_risk = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  const auto consider = [&](const Eigen::VectorXd& cone, double risk) {
    Eigen::VectorXd normalized = cone / cone.sum();
    if (best.size() == 0) {
      best = std::move(normalized);
      best_risk = risk;
      return;
    }
    if (improves(risk, normalized, best_risk, best)) {
      runner_up = std::min(runner_up, best_risk);
      best = std::move(normalized);
      best_risk = risk;
    } else {
      runner_up = std::min(runner_up, risk);
    }
  };

  // Vertices first: guarantees the ensemble never loses to a candidate.
  for (int v = 0; v < j; ++v) {
    const Eigen::VectorXd a = vertex(j, v);
    consider(a, cv_zeroone_risk(m, a));
  }

  if (j <= 3) {
    for_each_grid_point(j, grid_resolution, [&](const Eigen::VectorXd& a) {
      if (a.sum() <= 0.0) return;
      consider(a, cv_zeroone_risk(m, a));
    });
  }

  Rng rng(seed);
  for (int r = 0; r < restarts; ++r) {
    const std::vector<double> d = rng.dirichlet_flat(j);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(d.data(), j);
    double risk = cv_zeroone_risk(m, v);
    coordinate_refine(m, v, risk, grid_resolution);
    consider(v, risk);
  }

  out.alpha = best;
  out.achieved_risk = best_risk;
  out.restarts = restarts;
  out.runner_up_gap = std::isfinite(runner_up) ? runner_up - best_risk : 0.0;
  return out;
}

namespace {

Eigen::VectorXd surrogate_subgradient(const CvMatrix& m, const Eigen::VectorXd& alpha,
                                      Surrogate phi) {
  const int n = m.n();
  const Eigen::VectorXd score = m.f * alpha;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m.j());
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * m.label[i] - 1.0;
    const double margin = score[i] * s;
    double slope;  // d phi / d margin
    if (phi == Surrogate::hinge) {
      slope = margin < 1.0 ? -1.0 : 0.0;  // 0 at the kink
    } else {
      slope = -expit(-margin);
    }
    g += (m.weight[i] * slope * s) * m.f.row(i).transpose();
  }
  return g / static_cast<double>(std::max(n, 1));
}

/// Deterministic pairwise mass-transfer descent; for convex risks this
/// converges to the simplex optimum as the step shrinks.
void pairwise_polish(const CvMatrix& m, Surrogate phi, Eigen::VectorXd& alpha, double& risk) {
  const int j = m.j();
  for (double step = 0.25; step >= 1e-10; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int to = 0; to < j; ++to) {
        for (int from = 0; from < j; ++from) {
          if (from == to) continue;
          const double delta = std::min(step, alpha[from]);
          if (delta <= 0.0) continue;
          Eigen::VectorXd trial = alpha;
          trial[from] -= delta;
          trial[to] += delta;
          const double trial_risk = cv_surrogate_risk(m, trial, phi);
          if (trial_risk < risk - 1e-15) {
            alpha = trial;
            risk = trial_risk;
            improved = true;
          }
        }
      }
    }
  }
}

}  // namespace

EnsembleWeights solve_surrogate_weights(const CvMatrix& m, Surrogate phi) {
  const int j = m.j();
  if (j < 1) throw std::invalid_argument("solve_surrogate_weights: empty library");
  EnsembleWeights out;
  out.normalization = Normalization::cone_normalized;
  if (j == 1) {
    out.alpha = Eigen::VectorXd::Ones(1);
    out.achieved_risk = cv_surrogate_risk(m, out.alpha, phi);
    return out;
  }

  Eigen::VectorXd alpha = uniform_start(j);
  double risk = cv_surrogate_risk(m, alpha, phi);
  Eigen::VectorXd best = alpha;
  double best_risk = risk;

  const double g0 = surrogate_subgradient(m, alpha, phi).norm();
  const double c = 1.0 / (1.0 + g0);
  const int iterations = 5000;
  for (int t = 1; t <= iterations; ++t) {
    const Eigen::VectorXd g = surrogate_subgradient(m, alpha, phi);
    alpha = project_simplex(alpha - (c / std::sqrt(static_cast<double>(t))) * g);
    risk = cv_surrogate_risk(m, alpha, phi);
    if (risk < best_risk) {
      best_risk = risk;
      best = alpha;
    }
  }

  pairwise_polish(m, phi, best, best_risk);

  double runner_up = std::numeric_limits<double>::infinity();
  for (int v = 0; v < j; ++v) {
    const Eigen::VectorXd a = vertex(j, v);
    const double r = cv_surrogate_risk(m, a, phi);
    if (improves(r, a, best_risk, best)) {
      runner_up = best_risk;
      best = a;
      best_risk = r;
    } else {
      runner_up = std::min(runner_up, r);
    }
  }

  out.alpha = best;
  out.achieved_risk = best_risk;
  out.iterations = iterations;
  out.runner_up_gap = std::isfinite(runner_up) ? runner_up - best_risk : 0.0;
  return out;
}

EnsembleWeights solve_bernoulli_weights(const Eigen::MatrixXd& probs, const Eigen::VectorXd& y) {
  const int j = static_cast<int>(probs.cols());
  const int n = static_cast<int>(probs.rows());
  if (j < 1) throw std::invalid_argument("solve_bernoulli_weights: empty library");
  if (y.size() != n) throw std::invalid_argument("solve_bernoulli_weights: length mismatch");

  EnsembleWeights out;
  out.normalization = Normalization::simplex;

  const auto nll = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd p = probs * a;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double pi = std::min(std::max(p[i], 1e-12), 1.0 - 1e-12);
      total -= y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi);
    }
    return total / static_cast<double>(std::max(n, 1));
  };

  if (j == 1) {
    out.alpha = Eigen::VectorXd::Ones(1);
    out.achieved_risk = nll(out.alpha);
    return out;
  }

  const auto grad = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd p = probs * a;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(j);
    for (int i = 0; i < n; ++i) {
      const double pi = std::min(std::max(p[i], 1e-12), 1.0 - 1e-12);
      const double slope = -(y[i] / pi) + (1.0 - y[i]) / (1.0 - pi);
      g += slope * probs.row(i).transpose();
    }
    return Eigen::VectorXd(g / static_cast<double>(std::max(n, 1)));
  };
  PgResult pg = minimize_on_simplex(nll, grad, uniform_start(j), 10000, 1e-9);
  Eigen::VectorXd best = pg.alpha;
  double best_value = pg.value;
  for (int v = 0; v < j; ++v) {
    const Eigen::VectorXd a = vertex(j, v);
    const double r = nll(a);
    if (improves(r, a, best_value, best)) {
      best = a;
      best_value = r;
    }
  }
  out.alpha = best;
  out.achieved_risk = best_value;
  out.iterations = pg.iterations;
  return out;
}

}  // namespace itr
