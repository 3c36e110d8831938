#include "itr/rate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "itr/csv.hpp"
#include "itr/parallel.hpp"
#include "itr/rng.hpp"

namespace itr {

RateExperimentReport run_rate_experiment(const SynthDgp& dgp, const std::vector<int>& n_grid,
                                         int replications, const FitConfig& pipeline,
                                         const std::string& rule_name, std::uint64_t seed,
                                         int threads) {
  if (n_grid.empty()) throw std::invalid_argument("rate experiment: empty sample-size grid");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) {
      throw std::invalid_argument("rate experiment: sample sizes must increase");
    }
  }
  if (replications < 1) throw std::invalid_argument("rate experiment: replications must be >= 1");

  RateExperimentReport report;
  report.dgp = dgp.name;
  report.rule = rule_name;
  report.n_grid = n_grid;
  report.replications = replications;
  report.seed = seed;
  const int grid = static_cast<int>(n_grid.size());
  report.regrets.assign(static_cast<std::size_t>(grid),
                        std::vector<double>(static_cast<std::size_t>(replications), 0.0));
  report.seeds.assign(static_cast<std::size_t>(grid),
                      std::vector<std::uint64_t>(static_cast<std::size_t>(replications), 0));

  const int total = grid * replications;
  parallel_for(total, threads, [&](int task) {
    const int ni = task / replications;
    const int rep = task % replications;
    const std::uint64_t run_seed = mix_seed(seed, static_cast<std::uint64_t>(task));
    report.seeds[static_cast<std::size_t>(ni)][static_cast<std::size_t>(rep)] = run_seed;
    try {
      const Cohort cohort = simulate(dgp, n_grid[static_cast<std::size_t>(ni)], run_seed);
      FitConfig config = pipeline;
      config.seed = run_seed;
      config.threads = 1;  // outer loop owns the parallelism
      const FitResult fit = run_fit_pipeline(cohort, config);
      const auto it = fit.ensemble_rules.find(rule_name);
      if (it == fit.ensemble_rules.end()) {
        throw std::invalid_argument("fitted rules do not include '" + rule_name + "'");
      }
      report.regrets[static_cast<std::size_t>(ni)][static_cast<std::size_t>(rep)] =
          regret(it->second, dgp);
    } catch (const std::exception& e) {
      throw std::runtime_error("rate experiment failed at n=" +
                               std::to_string(n_grid[static_cast<std::size_t>(ni)]) +
                               ", replication " + std::to_string(rep) + ": " + e.what());
    }
  });

  report.mean_regret.resize(static_cast<std::size_t>(grid));
  report.se_regret.resize(static_cast<std::size_t>(grid));
  for (int ni = 0; ni < grid; ++ni) {
    const auto& r = report.regrets[static_cast<std::size_t>(ni)];
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= static_cast<double>(replications);
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    report.mean_regret[static_cast<std::size_t>(ni)] = mean;
    report.se_regret[static_cast<std::size_t>(ni)] =
        replications > 1 ? std::sqrt(ss / static_cast<double>(replications - 1) /
                                     static_cast<double>(replications))
                         : 0.0;
  }

  // Least-squares slope of log mean regret on log(log n / n). Exact zero
  // regrets clamp far below any observable level.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int ni = 0; ni < grid; ++ni) {
    const double n = static_cast<double>(report.n_grid[static_cast<std::size_t>(ni)]);
    const double x = std::log(std::log(n) / n);
    const double y = std::log(std::max(report.mean_regret[static_cast<std::size_t>(ni)], 1e-12));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double g = static_cast<double>(grid);
  const double denom = g * sxx - sx * sx;
  report.slope = denom != 0.0 ? (g * sxy - sx * sy) / denom : 0.0;
  return report;
}

std::string rate_report_to_json_string(const RateExperimentReport& report) {
  nlohmann::json j;
  j["dgp"] = report.dgp;
  j["rule"] = report.rule;
  j["n_grid"] = report.n_grid;
  j["replications"] = report.replications;
  j["seed"] = report.seed;
  j["regrets"] = report.regrets;
  j["run_seeds"] = report.seeds;
  j["mean_regret"] = report.mean_regret;
  j["se_regret"] = report.se_regret;
  j["slope"] = report.slope;
  return j.dump(2) + "\n";
}

std::string rate_report_table(const RateExperimentReport& report) {
  std::ostringstream out;
  out << "n\tmean_regret\tse\n";
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    out << report.n_grid[i] << '\t' << format_double(report.mean_regret[i]) << '\t'
        << format_double(report.se_regret[i]) << '\n';
  }
  out << "slope(log regret ~ log(log n / n)) = " << format_double(report.slope) << '\n';
  return out.str();
}

}  // namespace itr
