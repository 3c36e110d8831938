#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "itr/cohort.hpp"
#include "itr/cvrisk.hpp"
#include "itr/ensemble.hpp"
#include "itr/folds.hpp"
#include "itr/nuisance.hpp"
#include "itr/rules.hpp"

namespace itr {

struct NuisanceConfig {
  std::vector<LearnerSpec> learners;  // per-arm hazard/censoring library
  LearnerSpec propensity{"propensity", Family::logistic_main_effects};
  int cv_folds = 5;  // internal folds for ensemble weight selection
};

struct CandidateSpec {
  std::string name;
  RuleKind kind = RuleKind::d_reg;  // b_reg, d_reg or d_class
  LearnerSpec learner;
};

struct ZeroOneConfig {
  int restarts = 1000;
  int grid_resolution = 20;
};

struct FitConfig {
  int tau = 0;
  int folds = 5;
  bool stratified = true;
  std::uint64_t seed = 1;
  double eps_clip = 0.01;
  NuisanceConfig nuisance;
  std::vector<CandidateSpec> candidates;
  std::vector<std::string> losses = {"quadratic", "zeroone", "hinge", "log"};
  ZeroOneConfig zeroone;
  std::vector<int> z_cols;  // empty = all covariates
  int threads = 1;
  /// When set, every stage uses these exact nuisance functions instead of
  /// fitting them (synthetic-truth pipelines).
  std::shared_ptr<const NuisanceSet> oracle;
};

void validate_fit_config(const FitConfig& config, const Cohort& c);

/// Fits the fold-specific nuisances and candidates, then fills the
/// out-of-fold prediction matrix and transformation targets.
CvMatrix build_cv_matrix(const Cohort& c, const FoldPlan& plan, const FitConfig& config);

struct FitResult {
  FoldPlan plan;
  CvMatrix matrix;
  std::map<std::string, EnsembleWeights> weights;              // by loss
  std::map<std::string, std::vector<double>> candidate_risks;  // by loss
  std::vector<DecisionFunction> candidate_rules;               // full-data refits
  std::map<std::string, DecisionFunction> ensemble_rules;      // key sl_<loss>
  NuisanceSet nuisance_full;
  std::vector<std::string> warnings;
};

/// The whole training pipeline: folds, CV matrix, one weight vector per
/// requested loss, full-data refits, and assembled ensemble rules. Ensemble
/// dominance over single candidates is re-checked before returning.
FitResult run_fit_pipeline(const Cohort& c, const FitConfig& config);

double loss_risk(const CvMatrix& m, const std::string& loss, const Eigen::VectorXd& alpha);

}  // namespace itr
