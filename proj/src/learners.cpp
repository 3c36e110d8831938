#include "itr/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace itr {

Family family_from_string(const std::string& s) {
  if (s == "intercept_only") return Family::intercept_only;
  if (s == "logistic_main_effects") return Family::logistic_main_effects;
  if (s == "logistic_arm_interactions") return Family::logistic_arm_interactions;
  if (s == "stump_boost") return Family::stump_boost;
  throw std::invalid_argument("unknown learner family: " + s);
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::intercept_only: return "intercept_only";
    case Family::logistic_main_effects: return "logistic_main_effects";
    case Family::logistic_arm_interactions: return "logistic_arm_interactions";
    case Family::stump_boost: return "stump_boost";
  }
  return "?";
}

void validate_spec(const LearnerSpec& spec) {
  if (spec.name.empty()) throw std::invalid_argument("learner spec needs a name");
  if (spec.boost_rounds < 1 || spec.boost_rounds > 10000) {
    throw std::invalid_argument("learner " + spec.name + ": boost_rounds must be in [1,10000]");
  }
  if (!(spec.learn_rate > 0.0) || spec.learn_rate > 1.0) {
    throw std::invalid_argument("learner " + spec.name + ": learn_rate must be in (0,1]");
  }
  if (spec.screen_top < 0) {
    throw std::invalid_argument("learner " + spec.name + ": screen_top must be >= 0");
  }
}

double shrunken_mean(const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  const double wsum = weights.sum();
  const double ysum = weights.dot(y);
  return (ysum + 0.5) / (wsum + 1.0);
}

namespace {

double bernoulli_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                          const Eigen::VectorXd& w) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // -2 w [y log p + (1-y) log(1-p)], written via log1p(exp) for stability
    const double z = eta[i];
    const double log1pe = z > 30.0 ? z : std::log1p(std::exp(z));
    dev += 2.0 * w[i] * (log1pe - y[i] * z);
  }
  return dev;
}

}  // namespace

LinearModel fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& weights, Task task, const GlmOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n || weights.size() != n) {
    throw std::invalid_argument("fit_glm: outcome/weight length mismatch");
  }
  if (n == 0) throw std::invalid_argument("fit_glm: empty design");

  // Design with a leading intercept column; ridge skips the intercept.
  Eigen::MatrixXd xd(n, p + 1);
  xd.col(0).setOnes();
  xd.rightCols(p) = x;
  Eigen::VectorXd ridge = Eigen::VectorXd::Constant(p + 1, options.ridge);
  ridge[0] = 0.0;

  LinearModel model;
  if (task == Task::continuous) {
    Eigen::MatrixXd gram = xd.transpose() * weights.asDiagonal() * xd;
    gram += ridge.asDiagonal();
    // Tiny diagonal jitter keeps rank-deficient designs solvable.
    gram.diagonal().array() += 1e-12;
    const Eigen::VectorXd rhs = xd.transpose() * (weights.array() * y.array()).matrix();
    const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
    model.intercept = beta[0];
    model.coef = beta.tail(p);
    return model;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double dev = bernoulli_deviance(y, eta, weights) + options.ridge * beta.tail(p).squaredNorm();

  for (int iter = 0; iter < options.max_iter; ++iter) {
    Eigen::VectorXd mu(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      s[i] = std::max(weights[i] * mu[i] * (1.0 - mu[i]), 1e-12);
    }
    const Eigen::VectorXd grad =
        xd.transpose() * (weights.array() * (mu - y).array()).matrix() +
        (ridge.array() * beta.array()).matrix();
    Eigen::MatrixXd hess = xd.transpose() * s.asDiagonal() * xd;
    hess += ridge.asDiagonal();
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);

    // Step halving keeps the penalized deviance monotone.
    double scale = 1.0;
    Eigen::VectorXd beta_new, eta_new;
    double dev_new = std::numeric_limits<double>::infinity();
    for (int half = 0; half < 30; ++half) {
      beta_new = beta - scale * step;
      eta_new = xd * beta_new;
      dev_new = bernoulli_deviance(y, eta_new, weights) +
                options.ridge * beta_new.tail(p).squaredNorm();
      if (dev_new <= dev + 1e-12) break;
      scale *= 0.5;
    }
    const double change = dev - dev_new;
    beta = beta_new;
    eta = eta_new;
    dev = dev_new;
    if (std::abs(change) < options.tol) {
      model.intercept = beta[0];
      model.coef = beta.tail(p);
      return model;
    }
  }
  throw std::runtime_error("fit_glm: IRLS did not converge within " +
                           std::to_string(options.max_iter) +
                           " iterations (last deviance " + std::to_string(dev) + ")");
}

namespace {

struct SplitChoice {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
};

/// Best single split for Newton-style leaf values v = sum(g)/sum(h).
SplitChoice best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& g,
                       const Eigen::VectorXd& h,
                       const std::vector<std::vector<int>>& order) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double g_tot = g.sum();
  const double h_tot = h.sum();
  const auto leaf = [](double gs, double hs) { return gs / std::max(hs, 1e-12); };
  const auto score = [&](double gs, double hs) { return gs * gs / std::max(hs, 1e-12); };

  SplitChoice best;
  // Baseline: no split, a single intercept adjustment.
  best.gain = score(g_tot, h_tot);
  best.feature = -1;
  best.left = best.right = leaf(g_tot, h_tot);

  for (int j = 0; j < p; ++j) {
    const auto& idx = order[static_cast<std::size_t>(j)];
    double gl = 0.0, hl = 0.0;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      const int i = idx[static_cast<std::size_t>(k)];
      gl += g[i];
      hl += h[i];
      const double xi = x(i, j);
      const double xnext = x(idx[static_cast<std::size_t>(k + 1)], j);
      if (xnext == xi) continue;
      const double gain = score(gl, hl) + score(g_tot - gl, h_tot - hl);
      if (gain > best.gain + 1e-12) {
        best.gain = gain;
        best.feature = j;
        best.threshold = xi + 0.5 * (xnext - xi);
        best.left = leaf(gl, hl);
        best.right = leaf(g_tot - gl, h_tot - hl);
      }
    }
  }
  return best;
}

}  // namespace

StumpModel fit_stump_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& weights, Task task, int rounds,
                           double learn_rate) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n || weights.size() != n) {
    throw std::invalid_argument("fit_stump_boost: outcome/weight length mismatch");
  }
  if (n == 0) throw std::invalid_argument("fit_stump_boost: empty design");

  std::vector<std::vector<int>> order(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    auto& idx = order[static_cast<std::size_t>(j)];
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return x(a, j) < x(b, j); });
  }

  StumpModel model;
  const double wsum = weights.sum();
  Eigen::VectorXd f(n);
  if (task == Task::binary) {
    const double pbar = clamp_prob(weights.dot(y) / std::max(wsum, 1e-12), 1e-6);
    model.bias = logit(pbar);
  } else {
    model.bias = weights.dot(y) / std::max(wsum, 1e-12);
  }
  f.setConstant(model.bias);

  Eigen::VectorXd g(n), h(n);
  for (int r = 0; r < rounds; ++r) {
    if (task == Task::binary) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = expit(f[i]);
        g[i] = weights[i] * (y[i] - mu);
        h[i] = weights[i] * mu * (1.0 - mu);
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        g[i] = weights[i] * (y[i] - f[i]);
        h[i] = weights[i];
      }
    }
    SplitChoice split = best_split(x, g, h, order);
    Stump st;
    st.feature = std::max(split.feature, 0);
    st.threshold = split.feature >= 0 ? split.threshold
                                      : -std::numeric_limits<double>::infinity();
    st.left = learn_rate * split.left;
    st.right = learn_rate * split.right;
    if (split.feature < 0) {
      // Degenerate split: pure intercept move, same value both sides.
      st.left = st.right = learn_rate * split.left;
    }
    model.stumps.push_back(st);
    for (Eigen::Index i = 0; i < n; ++i) {
      f[i] += x(i, st.feature) < st.threshold ? st.left : st.right;
    }
  }
  return model;
}

}  // namespace itr
