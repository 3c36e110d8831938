#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "itr/cohort.hpp"
#include "itr/ensemble.hpp"
#include "itr/learners.hpp"
#include "itr/nuisance.hpp"
#include "itr/transform.hpp"

namespace itr {

struct SynthDgp;  // synth module

/// Serializable decision-score function over the covariate vector.
/// `z_cols` selects the covariates the model was trained on.
struct Predictor {
  enum class Type { constant, linear, stump_ensemble, combination };

  Type type = Type::constant;
  double value = 0.0;
  LinearModel linear;
  StumpModel stumps;
  std::vector<int> z_cols;
  std::vector<Predictor> parts;  // combination
  Eigen::VectorXd alpha;

  double eval(const Eigen::VectorXd& w) const;
};

enum class RuleKind { b_reg, d_reg, d_class, ensemble, constant };

RuleKind rule_kind_from_string(const std::string& s);
std::string rule_kind_to_string(RuleKind k);

/// A decision function f with its induced rule d(z) = 1{f(z) > 0}; ties at
/// zero always map to 0 (do not treat). Carries training provenance so that
/// evaluation can enforce disjointness.
struct DecisionFunction {
  RuleKind kind = RuleKind::constant;
  std::string name;
  Predictor f;
  int tau = 0;
  std::vector<std::string> training_ids;  // sorted

  double score(const Eigen::VectorXd& w) const { return f.eval(w); }
  int decide(const Eigen::VectorXd& w) const { return score(w) > 0.0 ? 1 : 0; }
};

struct ValueEstimate {
  double v_hat = 0.0;
  double se_hat = 0.0;
  int n_eval = 0;
  std::string rule_id;
  std::string nuisance_id;
};

/// Regression of the plug-in blip on z.
DecisionFunction fit_b_reg(const Cohort& train, const HazardModel& h, int tau,
                           const LearnerSpec& spec, const std::vector<int>& z_cols,
                           const std::string& name);

/// Regression of the doubly robust transformation on z.
DecisionFunction fit_d_reg(const Cohort& train, const NuisanceSet& eta, int tau,
                           const LearnerSpec& spec, const std::vector<int>& z_cols,
                           const std::string& name);

/// Weighted classification of 1{D > 0} with weights |D|; the score is the
/// classifier's link-scale output, so d = 1{score > 0}. Degenerate label
/// sets return the constant majority-label function.
DecisionFunction fit_d_class(const Cohort& train, const NuisanceSet& eta, int tau,
                             const LearnerSpec& spec, const std::vector<int>& z_cols,
                             const std::string& name);

/// Pointwise combination sum_j alpha_j f_j.
DecisionFunction assemble_rule(const std::vector<DecisionFunction>& candidates,
                               const EnsembleWeights& weights, const std::string& name);

/// Constant treat-everyone / treat-no-one references.
DecisionFunction make_constant_rule(int treat, const std::string& name);

/// Doubly robust empirical value P_n[d(Z) D_eta(O)] with its standard
/// error; throws when the rule's training ids overlap the evaluation ids.
ValueEstimate estimate_value(const DecisionFunction& rule, const Cohort& eval,
                             const NuisanceSet& eta_eval, int tau);

/// V0(optimal) - V0(rule) against the generating process (>= 0).
double regret(const DecisionFunction& rule, const SynthDgp& dgp);

std::string rule_to_json_string(const DecisionFunction& rule);
DecisionFunction rule_from_json_string(const std::string& text);
void write_rule_json(const DecisionFunction& rule, const std::string& path);
DecisionFunction read_rule_json(const std::string& path);

}  // namespace itr
