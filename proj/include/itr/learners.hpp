#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace itr {

/// Model structure of a candidate learner. The link follows the task:
/// binary outcomes use a logistic link, continuous ones the identity, so
/// `logistic_main_effects` fitted to a continuous target is a linear
/// main-effects least-squares fit.
enum class Family {
  intercept_only,
  logistic_main_effects,
  logistic_arm_interactions,
  stump_boost,
};

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

struct LearnerSpec {
  std::string name;
  Family family = Family::logistic_main_effects;
  int boost_rounds = 100;
  double learn_rate = 0.1;
  int screen_top = 0;  // 0 disables covariate screening
};

/// Throws std::invalid_argument when hyperparameters leave their ranges.
void validate_spec(const LearnerSpec& spec);

enum class Task { binary, continuous };

/// Affine score over a feature vector. For binary tasks the score is a
/// logit; probabilities come from expit(score).
struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;

  double score(const Eigen::VectorXd& x) const { return intercept + coef.dot(x); }
};

struct Stump {
  int feature = 0;
  double threshold = 0.0;
  double left = 0.0;   // value when x[feature] < threshold
  double right = 0.0;
};

/// Additive depth-1 ensemble on the link scale.
struct StumpModel {
  double bias = 0.0;
  std::vector<Stump> stumps;

  double score(const Eigen::VectorXd& x) const {
    double s = bias;
    for (const auto& st : stumps) {
      s += x[st.feature] < st.threshold ? st.left : st.right;
    }
    return s;
  }
};

struct GlmOptions {
  double ridge = 1e-6;    // penalty on non-intercept coefficients
  int max_iter = 100;
  double tol = 1e-8;      // deviance change convergence threshold
};

/// Weighted ridge GLM. Binary task: IRLS with step halving; throws
/// std::runtime_error carrying the last deviance when it fails to converge
/// within max_iter. Continuous task: one weighted normal-equations solve.
LinearModel fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& weights, Task task,
                    const GlmOptions& options = {});

/// Gradient boosting with depth-1 stumps. Binary task: logistic loss with
/// Newton leaf values; continuous: squared loss. Scores live on the link
/// scale. Deterministic: split ties resolve to the lower feature index and
/// lower threshold.
StumpModel fit_stump_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& weights, Task task, int rounds,
                           double learn_rate);

inline double expit(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clamp_prob(double p, double eps) {
  return p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
}

/// Add-half shrinkage toward 1/2 for binomial counts: (sum + 0.5)/(n + 1).
/// Keeps degenerate risk sets strictly inside (0,1). Weighted form uses
/// weight totals in place of counts.
double shrunken_mean(const Eigen::VectorXd& y, const Eigen::VectorXd& weights);

}  // namespace itr
