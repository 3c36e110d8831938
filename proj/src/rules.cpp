#include "itr/rules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "itr/synth.hpp"

namespace itr {

double Predictor::eval(const Eigen::VectorXd& w) const {
  switch (type) {
    case Type::constant:
      return value;
    case Type::linear: {
      Eigen::VectorXd z(static_cast<Eigen::Index>(z_cols.size()));
      for (std::size_t j = 0; j < z_cols.size(); ++j) {
        z[static_cast<Eigen::Index>(j)] = w[z_cols[j]];
      }
      return linear.score(z);
    }
    case Type::stump_ensemble: {
      Eigen::VectorXd z(static_cast<Eigen::Index>(z_cols.size()));
      for (std::size_t j = 0; j < z_cols.size(); ++j) {
        z[static_cast<Eigen::Index>(j)] = w[z_cols[j]];
      }
      return stumps.score(z);
    }
    case Type::combination: {
      double s = 0.0;
      for (std::size_t j = 0; j < parts.size(); ++j) {
        s += alpha[static_cast<Eigen::Index>(j)] * parts[j].eval(w);
      }
      return s;
    }
  }
  return 0.0;
}

RuleKind rule_kind_from_string(const std::string& s) {
  if (s == "b_reg") return RuleKind::b_reg;
  if (s == "d_reg") return RuleKind::d_reg;
  if (s == "d_class") return RuleKind::d_class;
  if (s == "ensemble") return RuleKind::ensemble;
  if (s == "constant") return RuleKind::constant;
  throw std::invalid_argument("unknown rule kind: " + s);
}

std::string rule_kind_to_string(RuleKind k) {
  switch (k) {
    case RuleKind::b_reg: return "b_reg";
    case RuleKind::d_reg: return "d_reg";
    case RuleKind::d_class: return "d_class";
    case RuleKind::ensemble: return "ensemble";
    case RuleKind::constant: return "constant";
  }
  return "?";
}

namespace {

std::vector<int> default_z_cols(const Cohort& c, const std::vector<int>& z_cols) {
  if (!z_cols.empty()) {
    for (int col : z_cols) {
      if (col < 0 || col >= c.p()) {
        throw std::invalid_argument("z column index " + std::to_string(col) + " out of range");
      }
    }
    return z_cols;
  }
  std::vector<int> all(static_cast<std::size_t>(c.p()));
  for (int j = 0; j < c.p(); ++j) all[static_cast<std::size_t>(j)] = j;
  return all;
}

Eigen::MatrixXd z_design(const Cohort& c, const std::vector<int>& cols) {
  Eigen::MatrixXd z(c.n(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    z.col(static_cast<Eigen::Index>(j)) = c.w.col(cols[j]);
  }
  return z;
}

std::vector<std::string> sorted_ids(const Cohort& c) {
  std::vector<std::string> ids = c.ids;
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Fits one regression/classification learner on (z, y, weights) and wraps
/// it as a serializable predictor.
Predictor fit_predictor(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& weights, Task task, const LearnerSpec& spec,
                        const std::vector<int>& cols) {
  validate_spec(spec);
  Predictor p;
  p.z_cols = cols;
  switch (spec.family) {
    case Family::intercept_only: {
      p.type = Predictor::Type::constant;
      const double wsum = weights.sum();
      if (task == Task::continuous) {
        p.value = wsum > 0.0 ? weights.dot(y) / wsum : 0.0;
      } else {
        p.value = logit(clamp_prob(shrunken_mean(y, weights), 1e-6));
      }
      return p;
    }
    case Family::logistic_main_effects: {
      p.type = Predictor::Type::linear;
      p.linear = fit_glm(z, y, weights, task);
      return p;
    }
    case Family::stump_boost: {
      p.type = Predictor::Type::stump_ensemble;
      p.stumps = fit_stump_boost(z, y, weights, task, spec.boost_rounds, spec.learn_rate);
      return p;
    }
    case Family::logistic_arm_interactions:
      throw std::invalid_argument(
          "rule candidates have no arm feature; arm-interaction family is not applicable");
  }
  throw std::invalid_argument("unhandled learner family");
}

}  // namespace

DecisionFunction fit_b_reg(const Cohort& train, const HazardModel& h, int tau,
                           const LearnerSpec& spec, const std::vector<int>& z_cols,
                           const std::string& name) {
  const std::vector<int> cols = default_z_cols(train, z_cols);
  Eigen::VectorXd target(train.n());
  for (int i = 0; i < train.n(); ++i) target[i] = blip_value(h, tau, train.w.row(i));
  DecisionFunction rule;
  rule.kind = RuleKind::b_reg;
  rule.name = name;
  rule.tau = tau;
  rule.training_ids = sorted_ids(train);
  rule.f = fit_predictor(z_design(train, cols), target, Eigen::VectorXd::Ones(train.n()),
                         Task::continuous, spec, cols);
  return rule;
}

DecisionFunction fit_d_reg(const Cohort& train, const NuisanceSet& eta, int tau,
                           const LearnerSpec& spec, const std::vector<int>& z_cols,
                           const std::string& name) {
  const std::vector<int> cols = default_z_cols(train, z_cols);
  const std::vector<DrValue> values = dr_transform_all(train, eta, tau);
  Eigen::VectorXd target(train.n());
  for (int i = 0; i < train.n(); ++i) target[i] = values[static_cast<std::size_t>(i)].d;
  DecisionFunction rule;
  rule.kind = RuleKind::d_reg;
  rule.name = name;
  rule.tau = tau;
  rule.training_ids = sorted_ids(train);
  rule.f = fit_predictor(z_design(train, cols), target, Eigen::VectorXd::Ones(train.n()),
                         Task::continuous, spec, cols);
  return rule;
}

DecisionFunction fit_d_class(const Cohort& train, const NuisanceSet& eta, int tau,
                             const LearnerSpec& spec, const std::vector<int>& z_cols,
                             const std::string& name) {
  const std::vector<int> cols = default_z_cols(train, z_cols);
  const std::vector<DrValue> values = dr_transform_all(train, eta, tau);
  Eigen::VectorXd label(train.n()), weight(train.n());
  int positives = 0, negatives = 0;
  for (int i = 0; i < train.n(); ++i) {
    const double d = values[static_cast<std::size_t>(i)].d;
    label[i] = d > 0.0 ? 1.0 : 0.0;
    weight[i] = std::abs(d);
    (label[i] > 0.5 ? positives : negatives) += 1;
  }

  DecisionFunction rule;
  rule.kind = RuleKind::d_class;
  rule.name = name;
  rule.tau = tau;
  rule.training_ids = sorted_ids(train);

  if (positives == 0 || negatives == 0) {
    rule.f.type = Predictor::Type::constant;
    rule.f.value = positives > 0 ? 1.0 : -1.0;
    return rule;
  }
  rule.f = fit_predictor(z_design(train, cols), label, weight, Task::binary, spec, cols);
  return rule;
}

DecisionFunction assemble_rule(const std::vector<DecisionFunction>& candidates,
                               const EnsembleWeights& weights, const std::string& name) {
  if (candidates.empty()) throw std::invalid_argument("assemble_rule: empty candidate list");
  if (weights.alpha.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw std::invalid_argument("assemble_rule: weight length " +
                                std::to_string(weights.alpha.size()) +
                                " != candidate count " + std::to_string(candidates.size()));
  }
  DecisionFunction rule;
  rule.kind = RuleKind::ensemble;
  rule.name = name;
  rule.tau = candidates.front().tau;
  rule.training_ids = candidates.front().training_ids;
  rule.f.type = Predictor::Type::combination;
  rule.f.alpha = weights.alpha;
  for (const auto& c : candidates) rule.f.parts.push_back(c.f);
  return rule;
}

DecisionFunction make_constant_rule(int treat, const std::string& name) {
  DecisionFunction rule;
  rule.kind = RuleKind::constant;
  rule.name = name;
  rule.f.type = Predictor::Type::constant;
  rule.f.value = treat == 1 ? 1.0 : -1.0;
  return rule;
}

ValueEstimate estimate_value(const DecisionFunction& rule, const Cohort& eval,
                             const NuisanceSet& eta_eval, int tau) {
  if (!rule.training_ids.empty()) {
    const std::set<std::string> train_set(rule.training_ids.begin(), rule.training_ids.end());
    for (const auto& id : eval.ids) {
      if (train_set.count(id) > 0) {
        throw std::invalid_argument("evaluation data overlaps the rule's training data (id " +
                                    id + ")");
      }
    }
  }
  const std::vector<DrValue> values = dr_transform_all(eval, eta_eval, tau);
  const int n = eval.n();
  double sum = 0.0;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    const double xi =
        rule.decide(eval.w.row(i)) == 1 ? values[static_cast<std::size_t>(i)].d : 0.0;
    x[i] = xi;
    sum += xi;
  }
  ValueEstimate est;
  est.n_eval = n;
  est.rule_id = rule.name;
  est.nuisance_id = eta_eval.id;
  est.v_hat = n > 0 ? sum / static_cast<double>(n) : 0.0;
  if (n > 1) {
    const double mean = est.v_hat;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) ss += (x[i] - mean) * (x[i] - mean);
    est.se_hat = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return est;
}

double regret(const DecisionFunction& rule, const SynthDgp& dgp) {
  const double v_rule =
      true_value(dgp, [&](const Eigen::VectorXd& w) { return rule.decide(w); });
  return optimal_value(dgp) - v_rule;
}

namespace {

using nlohmann::json;

json predictor_to_json(const Predictor& p) {
  json j;
  switch (p.type) {
    case Predictor::Type::constant:
      j["type"] = "constant";
      j["value"] = p.value;
      break;
    case Predictor::Type::linear: {
      j["type"] = "linear";
      j["intercept"] = p.linear.intercept;
      j["coef"] = std::vector<double>(p.linear.coef.data(),
                                      p.linear.coef.data() + p.linear.coef.size());
      j["z_cols"] = p.z_cols;
      break;
    }
    case Predictor::Type::stump_ensemble: {
      j["type"] = "stump_ensemble";
      j["bias"] = p.stumps.bias;
      json stumps = json::array();
      for (const auto& s : p.stumps.stumps) {
        stumps.push_back({{"feature", s.feature},
                          {"threshold", s.threshold},
                          {"left", s.left},
                          {"right", s.right}});
      }
      j["stumps"] = std::move(stumps);
      j["z_cols"] = p.z_cols;
      break;
    }
    case Predictor::Type::combination: {
      j["type"] = "combination";
      j["alpha"] = std::vector<double>(p.alpha.data(), p.alpha.data() + p.alpha.size());
      json parts = json::array();
      for (const auto& part : p.parts) parts.push_back(predictor_to_json(part));
      j["parts"] = std::move(parts);
      break;
    }
  }
  return j;
}

Predictor predictor_from_json(const json& j) {
  Predictor p;
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") {
    p.type = Predictor::Type::constant;
    p.value = j.at("value").get<double>();
  } else if (type == "linear") {
    p.type = Predictor::Type::linear;
    p.linear.intercept = j.at("intercept").get<double>();
    const auto coef = j.at("coef").get<std::vector<double>>();
    p.linear.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(),
                                                      static_cast<Eigen::Index>(coef.size()));
    p.z_cols = j.at("z_cols").get<std::vector<int>>();
  } else if (type == "stump_ensemble") {
    p.type = Predictor::Type::stump_ensemble;
    p.stumps.bias = j.at("bias").get<double>();
    for (const auto& s : j.at("stumps")) {
      Stump st;
      st.feature = s.at("feature").get<int>();
      st.threshold = s.at("threshold").get<double>();
      st.left = s.at("left").get<double>();
      st.right = s.at("right").get<double>();
      p.stumps.stumps.push_back(st);
    }
    p.z_cols = j.at("z_cols").get<std::vector<int>>();
  } else if (type == "combination") {
    p.type = Predictor::Type::combination;
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    p.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(),
                                                static_cast<Eigen::Index>(alpha.size()));
    for (const auto& part : j.at("parts")) p.parts.push_back(predictor_from_json(part));
  } else {
    throw std::invalid_argument("unknown predictor type: " + type);
  }
  return p;
}

}  // namespace

std::string rule_to_json_string(const DecisionFunction& rule) {
  json j;
  j["kind"] = rule_kind_to_string(rule.kind);
  j["name"] = rule.name;
  j["tau"] = rule.tau;
  j["predictor"] = predictor_to_json(rule.f);
  j["training_ids"] = rule.training_ids;
  return j.dump(2) + "\n";
}

DecisionFunction rule_from_json_string(const std::string& text) {
  const json j = json::parse(text);
  DecisionFunction rule;
  rule.kind = rule_kind_from_string(j.at("kind").get<std::string>());
  rule.name = j.at("name").get<std::string>();
  rule.tau = j.at("tau").get<int>();
  rule.f = predictor_from_json(j.at("predictor"));
  rule.training_ids = j.at("training_ids").get<std::vector<std::string>>();
  return rule;
}

void write_rule_json(const DecisionFunction& rule, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write rule file: " + path);
  out << rule_to_json_string(rule);
}

DecisionFunction read_rule_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open rule file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return rule_from_json_string(text);
}

}  // namespace itr
