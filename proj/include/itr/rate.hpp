#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itr/pipeline.hpp"
#include "itr/synth.hpp"

namespace itr {

/// Mean regret of the fitted rule across replications for each sample
/// size, with the slope of log mean regret against log(log n / n).
struct RateExperimentReport {
  std::string dgp;
  std::string rule;  // which fitted rule is evaluated, e.g. sl_quadratic
  std::vector<int> n_grid;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> regrets;        // [n index][replication]
  std::vector<std::vector<std::uint64_t>> seeds;   // per-run generator seeds
  std::vector<double> mean_regret;
  std::vector<double> se_regret;  // standard error of the mean across reps
  double slope = 0.0;
};

/// Simulates, runs the full fit pipeline, and scores regret against the
/// truth for every (n, replication) pair. Replications run in parallel
/// with independent seeded generators; results merge deterministically.
RateExperimentReport run_rate_experiment(const SynthDgp& dgp, const std::vector<int>& n_grid,
                                         int replications, const FitConfig& pipeline,
                                         const std::string& rule_name, std::uint64_t seed,
                                         int threads);

std::string rate_report_to_json_string(const RateExperimentReport& report);
std::string rate_report_table(const RateExperimentReport& report);

}  // namespace itr
