#include "itr/pipeline.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "itr/parallel.hpp"
#include "itr/rng.hpp"
#include "itr/transform.hpp"

namespace itr {

namespace {

std::vector<int> arm_event_strata(const Cohort& c) {
  std::vector<int> strata(static_cast<std::size_t>(c.n()));
  for (int i = 0; i < c.n(); ++i) strata[static_cast<std::size_t>(i)] = 2 * c.a[i] + c.delta[i];
  return strata;
}

bool has_both_arms(const Cohort& c) {
  bool a0 = false, a1 = false;
  for (int i = 0; i < c.n(); ++i) (c.a[i] == 1 ? a1 : a0) = true;
  return a0 && a1;
}

NuisanceSet fit_fold_nuisance(const Cohort& train, const FitConfig& config,
                              std::uint64_t fold_seed) {
  if (config.oracle) return *config.oracle;
  const int internal = std::max(2, std::min(config.nuisance.cv_folds, train.n()));
  const FoldPlan plan = make_stratified_folds(arm_event_strata(train), internal, fold_seed);
  return fit_nuisance_superlearner(train, config.nuisance.learners, plan, config.tau,
                                   config.eps_clip, config.nuisance.propensity);
}

DecisionFunction fit_candidate(const Cohort& train, const NuisanceSet& eta,
                               const CandidateSpec& spec, const FitConfig& config) {
  switch (spec.kind) {
    case RuleKind::b_reg:
      return fit_b_reg(train, eta.h, config.tau, spec.learner, config.z_cols, spec.name);
    case RuleKind::d_reg:
      return fit_d_reg(train, eta, config.tau, spec.learner, config.z_cols, spec.name);
    case RuleKind::d_class:
      return fit_d_class(train, eta, config.tau, spec.learner, config.z_cols, spec.name);
    default:
      throw std::invalid_argument("candidate '" + spec.name +
                                  "': kind must be b_reg, d_reg or d_class");
  }
}

}  // namespace

void validate_fit_config(const FitConfig& config, const Cohort& c) {
  if (config.tau < 1 || config.tau > c.k_max) {
    throw std::invalid_argument("restriction time must lie in {1,...," +
                                std::to_string(c.k_max) + "}");
  }
  if (config.candidates.empty()) {
    throw std::invalid_argument("at least one candidate rule estimator is required");
  }
  if (!config.oracle && config.nuisance.learners.empty()) {
    throw std::invalid_argument("nuisance learner library is empty");
  }
  if (config.folds < 2) throw std::invalid_argument("fold count must be >= 2");
  if (config.folds > c.n()) throw std::invalid_argument("fold count exceeds sample size");
  if (!(config.eps_clip > 0.0) || config.eps_clip >= 0.5) {
    throw std::invalid_argument("epsilon_clip must lie in (0, 0.5)");
  }
  std::set<std::string> names;
  for (const auto& cand : config.candidates) {
    validate_spec(cand.learner);
    if (!names.insert(cand.name).second) {
      throw std::invalid_argument("duplicate candidate name: " + cand.name);
    }
    if (cand.kind != RuleKind::b_reg && cand.kind != RuleKind::d_reg &&
        cand.kind != RuleKind::d_class) {
      throw std::invalid_argument("candidate '" + cand.name + "': invalid kind");
    }
  }
  for (const auto& loss : config.losses) {
    if (loss != "quadratic" && loss != "zeroone" && loss != "hinge" && loss != "log") {
      throw std::invalid_argument("unknown ensemble loss: " + loss);
    }
  }
  if (!has_both_arms(c)) {
    throw std::invalid_argument("cohort must contain both treatment arms");
  }
}

CvMatrix build_cv_matrix(const Cohort& c, const FoldPlan& plan, const FitConfig& config) {
  const int n = c.n();
  const int j = static_cast<int>(config.candidates.size());
  if (plan.n() != n) throw std::invalid_argument("fold plan size mismatch");

  CvMatrix m;
  m.f.resize(n, j);
  m.target.resize(n);
  m.fold = plan.assignment;
  m.ids = c.ids;
  for (const auto& cand : config.candidates) m.candidate_names.push_back(cand.name);

  parallel_for(plan.k, config.threads, [&](int fold) {
    const std::vector<int> train_rows = plan.training(fold);
    const std::vector<int> val_rows = plan.validation(fold);
    const Cohort train = c.subset(train_rows);
    if (!has_both_arms(train)) {
      throw std::invalid_argument(
          "training fold " + std::to_string(fold) +
          " contains a single treatment arm; use stratified folds");
    }
    const NuisanceSet eta = fit_fold_nuisance(train, config, mix_seed(config.seed, 100 + fold));

    std::vector<DecisionFunction> fold_candidates;
    fold_candidates.reserve(static_cast<std::size_t>(j));
    for (const auto& spec : config.candidates) {
      fold_candidates.push_back(fit_candidate(train, eta, spec, config));
    }
    for (int row : val_rows) {
      m.target[row] = dr_transform(c.subject(row), eta, config.tau).d;
      for (int cand = 0; cand < j; ++cand) {
        m.f(row, cand) = fold_candidates[static_cast<std::size_t>(cand)].score(c.w.row(row));
      }
    }
  });

  m.finalize_targets();
  return m;
}

double loss_risk(const CvMatrix& m, const std::string& loss, const Eigen::VectorXd& alpha) {
  if (loss == "quadratic") return cv_quadratic_risk(m, alpha);
  if (loss == "zeroone") return cv_zeroone_risk(m, alpha);
  if (loss == "hinge") return cv_surrogate_risk(m, alpha, Surrogate::hinge);
  if (loss == "log") return cv_surrogate_risk(m, alpha, Surrogate::log);
  throw std::invalid_argument("unknown ensemble loss: " + loss);
}

FitResult run_fit_pipeline(const Cohort& c, const FitConfig& config) {
  validate_fit_config(config, c);

  FitResult result;
  result.plan = config.stratified
                    ? make_stratified_folds(arm_event_strata(c), config.folds, config.seed)
                    : make_folds(c.n(), config.folds, config.seed);
  result.warnings = expand_risk_sets(c, config.tau).warnings;
  result.matrix = build_cv_matrix(c, result.plan, config);

  const int j = result.matrix.j();
  for (const auto& loss : config.losses) {
    EnsembleWeights w;
    if (loss == "quadratic") {
      w = solve_quadratic_weights(result.matrix);
    } else if (loss == "zeroone") {
      w = solve_zeroone_weights(result.matrix, config.zeroone.restarts,
                                config.zeroone.grid_resolution, mix_seed(config.seed, 777));
    } else if (loss == "hinge") {
      w = solve_surrogate_weights(result.matrix, Surrogate::hinge);
    } else {
      w = solve_surrogate_weights(result.matrix, Surrogate::log);
    }
    result.weights.emplace(loss, std::move(w));

    std::vector<double> risks(static_cast<std::size_t>(j));
    for (int cand = 0; cand < j; ++cand) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(j);
      e[cand] = 1.0;
      risks[static_cast<std::size_t>(cand)] = loss_risk(result.matrix, loss, e);
    }
    result.candidate_risks.emplace(loss, std::move(risks));
  }

  // Invariant re-check: the ensemble never loses to a single candidate.
  for (const auto& loss : config.losses) {
    const double achieved = result.weights.at(loss).achieved_risk;
    const auto& risks = result.candidate_risks.at(loss);
    const double best_single = *std::min_element(risks.begin(), risks.end());
    const double slack = loss == "zeroone" ? 0.0 : 1e-9;
    if (achieved > best_single + slack) {
      throw std::runtime_error("ensemble dominance violated for loss '" + loss + "': " +
                               std::to_string(achieved) + " > " + std::to_string(best_single));
    }
  }

  result.nuisance_full = config.oracle
                             ? *config.oracle
                             : fit_fold_nuisance(c, config, mix_seed(config.seed, 999));
  for (const auto& spec : config.candidates) {
    result.candidate_rules.push_back(fit_candidate(c, result.nuisance_full, spec, config));
  }
  for (const auto& loss : config.losses) {
    result.ensemble_rules.emplace(
        "sl_" + loss,
        assemble_rule(result.candidate_rules, result.weights.at(loss), "sl_" + loss));
  }
  return result;
}

}  // namespace itr
