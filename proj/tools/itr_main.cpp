// Command-line front end: simulate / fit / evaluate / rate over a single
// JSON config file. All outputs are deterministic in (config, seed);
// wall-clock timestamps live only in run_meta.json.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "itr/cohort.hpp"
#include "itr/csv.hpp"
#include "itr/parallel.hpp"
#include "itr/pipeline.hpp"
#include "itr/rate.hpp"
#include "itr/rules.hpp"
#include "itr/synth.hpp"
#include "itr/transform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void require_keys(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

itr::LearnerSpec learner_from_json(const json& j, const std::string& where) {
  require_keys(j, where, {"name", "family", "boost_rounds", "learn_rate", "screen_top"});
  itr::LearnerSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.family = itr::family_from_string(j.at("family").get<std::string>());
  if (j.contains("boost_rounds")) spec.boost_rounds = j.at("boost_rounds").get<int>();
  if (j.contains("learn_rate")) spec.learn_rate = j.at("learn_rate").get<double>();
  if (j.contains("screen_top")) spec.screen_top = j.at("screen_top").get<int>();
  itr::validate_spec(spec);
  return spec;
}

itr::CandidateSpec candidate_from_json(const json& j, const std::string& where) {
  require_keys(j, where, {"name", "kind", "family", "boost_rounds", "learn_rate"});
  itr::CandidateSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.kind = itr::rule_kind_from_string(j.at("kind").get<std::string>());
  spec.learner.name = spec.name;
  spec.learner.family = itr::family_from_string(j.at("family").get<std::string>());
  if (j.contains("boost_rounds")) spec.learner.boost_rounds = j.at("boost_rounds").get<int>();
  if (j.contains("learn_rate")) spec.learner.learn_rate = j.at("learn_rate").get<double>();
  itr::validate_spec(spec.learner);
  return spec;
}

struct RunConfig {
  json raw;
  std::uint64_t seed = 1;
  std::string out = "itr_out";
  int threads = 1;

  // data source
  std::optional<std::string> data_path;
  std::optional<std::string> schema_path;
  std::optional<std::string> sim_dgp;
  int sim_n = 0;

  int tau = 0;
  bool tau_given = false;
  itr::FitConfig fit;
  std::vector<std::string> z_columns;
  bool dump_cv_matrix = true;
  bool dump_dr_terms = false;
  std::optional<std::string> nuisance_oracle;

  // evaluate
  std::optional<std::string> eval_rule_path;
  std::string eval_nuisance = "fit";

  // rate
  std::optional<std::string> rate_dgp;
  std::vector<int> rate_n_grid;
  int rate_replications = 0;
  std::string rate_rule = "sl_quadratic";
};

RunConfig parse_config(const std::string& path, const CliOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error: " + std::string(e.what()));
  }
  require_keys(j, "config",
               {"seed", "out", "threads", "data", "simulate", "tau", "folds", "stratified",
                "epsilon_clip", "z_columns", "nuisance", "candidates", "losses", "zeroone",
                "dump_cv_matrix", "dump_dr_terms", "evaluate", "rate"});

  RunConfig c;
  c.raw = j;
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();

  if (j.contains("data")) {
    require_keys(j.at("data"), "data", {"path", "schema"});
    c.data_path = j.at("data").at("path").get<std::string>();
    if (j.at("data").contains("schema")) {
      c.schema_path = j.at("data").at("schema").get<std::string>();
    }
  }
  if (j.contains("simulate")) {
    require_keys(j.at("simulate"), "simulate", {"dgp", "n"});
    c.sim_dgp = j.at("simulate").at("dgp").get<std::string>();
    c.sim_n = j.at("simulate").at("n").get<int>();
  }

  if (j.contains("tau")) {
    c.tau = j.at("tau").get<int>();
    c.tau_given = true;
  }
  if (j.contains("folds")) c.fit.folds = j.at("folds").get<int>();
  if (j.contains("stratified")) c.fit.stratified = j.at("stratified").get<bool>();
  if (j.contains("epsilon_clip")) c.fit.eps_clip = j.at("epsilon_clip").get<double>();
  if (j.contains("z_columns")) c.z_columns = j.at("z_columns").get<std::vector<std::string>>();
  if (j.contains("losses")) c.fit.losses = j.at("losses").get<std::vector<std::string>>();
  if (j.contains("zeroone")) {
    require_keys(j.at("zeroone"), "zeroone", {"restarts", "grid_resolution"});
    if (j.at("zeroone").contains("restarts")) {
      c.fit.zeroone.restarts = j.at("zeroone").at("restarts").get<int>();
    }
    if (j.at("zeroone").contains("grid_resolution")) {
      c.fit.zeroone.grid_resolution = j.at("zeroone").at("grid_resolution").get<int>();
    }
  }
  if (j.contains("dump_cv_matrix")) c.dump_cv_matrix = j.at("dump_cv_matrix").get<bool>();
  if (j.contains("dump_dr_terms")) c.dump_dr_terms = j.at("dump_dr_terms").get<bool>();

  if (j.contains("nuisance")) {
    const json& nj = j.at("nuisance");
    require_keys(nj, "nuisance", {"learners", "propensity", "cv_folds", "oracle"});
    if (nj.contains("learners")) {
      for (const auto& lj : nj.at("learners")) {
        c.fit.nuisance.learners.push_back(learner_from_json(lj, "nuisance.learners"));
      }
    }
    if (nj.contains("propensity")) {
      c.fit.nuisance.propensity = learner_from_json(nj.at("propensity"), "nuisance.propensity");
    }
    if (nj.contains("cv_folds")) c.fit.nuisance.cv_folds = nj.at("cv_folds").get<int>();
    if (nj.contains("oracle")) c.nuisance_oracle = nj.at("oracle").get<std::string>();
  }
  if (j.contains("candidates")) {
    for (const auto& cj : j.at("candidates")) {
      c.fit.candidates.push_back(candidate_from_json(cj, "candidates"));
    }
  }

  if (j.contains("evaluate")) {
    require_keys(j.at("evaluate"), "evaluate", {"rule", "nuisance"});
    c.eval_rule_path = j.at("evaluate").at("rule").get<std::string>();
    if (j.at("evaluate").contains("nuisance")) {
      c.eval_nuisance = j.at("evaluate").at("nuisance").get<std::string>();
    }
  }
  if (j.contains("rate")) {
    require_keys(j.at("rate"), "rate", {"dgp", "n_grid", "replications", "rule"});
    c.rate_dgp = j.at("rate").at("dgp").get<std::string>();
    c.rate_n_grid = j.at("rate").at("n_grid").get<std::vector<int>>();
    c.rate_replications = j.at("rate").at("replications").get<int>();
    if (j.at("rate").contains("rule")) c.rate_rule = j.at("rate").at("rule").get<std::string>();
  }

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.out) c.out = *overrides.out;
  if (overrides.threads) c.threads = *overrides.threads;
  if (c.threads < 1) throw std::invalid_argument("threads must be >= 1");
  c.fit.seed = c.seed;
  c.fit.threads = c.threads;
  return c;
}

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_run_meta(const RunConfig& c, const std::string& command,
                    const std::string& started, const std::vector<std::string>& warnings) {
  json meta;
  meta["command"] = command;
  meta["config"] = c.raw;
  meta["seed"] = c.seed;
  meta["threads"] = c.threads;
  meta["warnings"] = warnings;
  meta["timestamps"] = {{"started", started}, {"finished", timestamp_now()}};
  write_text(fs::path(c.out) / "run_meta.json", meta.dump(2) + "\n");
}

itr::Cohort load_cohort(const RunConfig& c, std::uint64_t seed) {
  if (c.data_path) {
    itr::CsvSchema schema;
    if (c.schema_path) schema = itr::read_schema_file(*c.schema_path);
    return itr::read_cohort(*c.data_path, schema);
  }
  if (c.sim_dgp) {
    if (c.sim_n < 1) throw std::invalid_argument("simulate.n must be >= 1");
    return itr::simulate(itr::dgp_by_name(*c.sim_dgp), c.sim_n, seed);
  }
  throw std::invalid_argument("config needs either a 'data' or a 'simulate' section");
}

std::vector<int> resolve_z_columns(const itr::Cohort& cohort,
                                   const std::vector<std::string>& names) {
  std::vector<int> cols;
  for (const auto& name : names) {
    const auto it = std::find(cohort.w_names.begin(), cohort.w_names.end(), name);
    if (it == cohort.w_names.end()) {
      throw std::invalid_argument("z_columns: unknown covariate '" + name + "'");
    }
    cols.push_back(static_cast<int>(it - cohort.w_names.begin()));
  }
  return cols;
}

int resolve_tau(const RunConfig& c, const itr::Cohort& cohort) {
  if (c.tau_given) return c.tau;
  if (c.sim_dgp) return itr::dgp_by_name(*c.sim_dgp).tau;
  throw std::invalid_argument("config needs 'tau'");
}

std::shared_ptr<const itr::NuisanceSet> resolve_oracle(const RunConfig& c) {
  if (!c.nuisance_oracle) return nullptr;
  return std::make_shared<itr::NuisanceSet>(
      itr::make_oracle_nuisance(itr::dgp_by_name(*c.nuisance_oracle)));
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& c) {
  const std::string started = timestamp_now();
  if (!c.sim_dgp) throw std::invalid_argument("simulate command needs a 'simulate' section");
  if (c.sim_n < 1) throw std::invalid_argument("simulate.n must be >= 1");
  const itr::SynthDgp& dgp = itr::dgp_by_name(*c.sim_dgp);
  const itr::Cohort cohort = itr::simulate(dgp, c.sim_n, c.seed);

  fs::create_directories(c.out);
  itr::write_cohort_csv(cohort, (fs::path(c.out) / "cohort.csv").string());

  json truth;
  truth["dgp"] = dgp.name;
  truth["n"] = c.sim_n;
  truth["seed"] = c.seed;
  truth["tau"] = dgp.tau;
  truth["k_max"] = dgp.k_max;
  truth["optimal_value"] = itr::optimal_value(dgp);
  if (dgp.discrete_w) {
    json grid = json::array();
    for (std::size_t i = 0; i < dgp.w_grid.size(); ++i) {
      grid.push_back({{"w", std::vector<double>(dgp.w_grid[i].data(),
                                                dgp.w_grid[i].data() + dgp.w_grid[i].size())},
                      {"prob", dgp.w_prob[i]},
                      {"theta", itr::true_blip(dgp, dgp.w_grid[i])}});
    }
    truth["theta_grid"] = std::move(grid);
  }
  write_text(fs::path(c.out) / "truth.json", truth.dump(2) + "\n");
  write_run_meta(c, "simulate", started, {});
  std::cout << "wrote " << c.sim_n << " subjects to " << (fs::path(c.out) / "cohort.csv").string()
            << "\n";
  return 0;
}

int cmd_fit(const RunConfig& c) {
  const std::string started = timestamp_now();
  const itr::Cohort cohort = load_cohort(c, c.seed);

  itr::FitConfig config = c.fit;
  config.tau = resolve_tau(c, cohort);
  config.z_cols = resolve_z_columns(cohort, c.z_columns);
  config.oracle = resolve_oracle(c);

  const itr::FitResult fit = itr::run_fit_pipeline(cohort, config);

  fs::create_directories(fs::path(c.out) / "rules");

  // Weight table, candidates as rows and losses as columns.
  {
    std::ostringstream out;
    out << "candidate";
    for (const auto& loss : config.losses) out << ',' << loss;
    out << '\n';
    for (int j = 0; j < fit.matrix.j(); ++j) {
      out << fit.matrix.candidate_names[static_cast<std::size_t>(j)];
      for (const auto& loss : config.losses) {
        out << ',' << itr::format_double(fit.weights.at(loss).alpha[j]);
      }
      out << '\n';
    }
    write_text(fs::path(c.out) / "weights.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "component,arm,learner,weight\n";
    for (const auto& e : fit.nuisance_full.weight_table) {
      out << e.component << ',' << e.arm << ',' << e.learner << ','
          << itr::format_double(e.weight) << '\n';
    }
    write_text(fs::path(c.out) / "nuisance_weights.csv", out.str());
  }

  json report;
  report["n"] = cohort.n();
  report["tau"] = config.tau;
  report["folds"] = config.folds;
  report["seed"] = c.seed;
  report["candidates"] = fit.matrix.candidate_names;
  json losses = json::object();
  for (const auto& loss : config.losses) {
    const itr::EnsembleWeights& w = fit.weights.at(loss);
    const auto& risks = fit.candidate_risks.at(loss);
    const double best_single = *std::min_element(risks.begin(), risks.end());
    losses[loss] = {
        {"achieved_risk", w.achieved_risk},
        {"alpha", std::vector<double>(w.alpha.data(), w.alpha.data() + w.alpha.size())},
        {"candidate_risks", risks},
        {"iterations", w.iterations},
        {"restarts", w.restarts},
        {"dominates_candidates", w.achieved_risk <= best_single + (loss == "zeroone" ? 0.0 : 1e-9)},
    };
  }
  report["losses"] = std::move(losses);
  json nw = json::array();
  for (const auto& e : fit.nuisance_full.weight_table) {
    nw.push_back({{"component", e.component},
                  {"arm", e.arm},
                  {"learner", e.learner},
                  {"weight", e.weight}});
  }
  report["nuisance_weights"] = std::move(nw);
  report["warnings"] = fit.warnings;
  write_text(fs::path(c.out) / "cv_report.json", report.dump(2) + "\n");

  if (c.dump_cv_matrix) {
    itr::write_cv_matrix_csv(fit.matrix, (fs::path(c.out) / "cv_matrix.csv").string());
  }
  if (c.dump_dr_terms) {
    const auto values = itr::dr_transform_all(cohort, fit.nuisance_full, config.tau);
    itr::write_dr_terms_csv(values, (fs::path(c.out) / "dr_terms.csv").string());
  }

  for (const auto& rule : fit.candidate_rules) {
    itr::write_rule_json(rule, (fs::path(c.out) / "rules" / (rule.name + ".json")).string());
  }
  for (const auto& [name, rule] : fit.ensemble_rules) {
    itr::write_rule_json(rule, (fs::path(c.out) / "rules" / (name + ".json")).string());
  }

  write_run_meta(c, "fit", started, fit.warnings);
  std::cout << "fitted " << fit.matrix.j() << " candidates and " << config.losses.size()
            << " ensembles on n=" << cohort.n() << "; outputs in " << c.out << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& c) {
  const std::string started = timestamp_now();
  if (!c.eval_rule_path) throw std::invalid_argument("evaluate command needs an 'evaluate' section");
  const itr::DecisionFunction rule = itr::read_rule_json(*c.eval_rule_path);
  const itr::Cohort eval = load_cohort(c, c.seed);
  const int tau = c.tau_given ? c.tau : rule.tau;

  itr::NuisanceSet eta;
  if (c.eval_nuisance == "fit") {
    if (c.fit.nuisance.learners.empty()) {
      throw std::invalid_argument("evaluate.nuisance='fit' needs nuisance.learners");
    }
    std::vector<int> strata(static_cast<std::size_t>(eval.n()));
    for (int i = 0; i < eval.n(); ++i) {
      strata[static_cast<std::size_t>(i)] = 2 * eval.a[i] + eval.delta[i];
    }
    const itr::FoldPlan plan = itr::make_stratified_folds(
        strata, std::max(2, std::min(c.fit.nuisance.cv_folds, eval.n())), c.seed);
    eta = itr::fit_nuisance_superlearner(eval, c.fit.nuisance.learners, plan, tau,
                                         c.fit.eps_clip, c.fit.nuisance.propensity);
  } else if (c.eval_nuisance.rfind("oracle:", 0) == 0) {
    eta = itr::make_oracle_nuisance(itr::dgp_by_name(c.eval_nuisance.substr(7)));
  } else {
    throw std::invalid_argument("evaluate.nuisance must be 'fit' or 'oracle:<dgp>'");
  }

  fs::create_directories(c.out);
  const auto emit = [&](const itr::DecisionFunction& r, const std::string& filename) {
    const itr::ValueEstimate est = itr::estimate_value(r, eval, eta, tau);
    json j;
    j["rule"] = est.rule_id;
    j["nuisance"] = est.nuisance_id;
    j["n_eval"] = est.n_eval;
    j["v_hat"] = est.v_hat;
    j["se_hat"] = est.se_hat;
    write_text(fs::path(c.out) / filename, j.dump(2) + "\n");
    std::cout << est.rule_id << ": value " << est.v_hat << " (se " << est.se_hat << ")\n";
  };
  emit(rule, "value_" + rule.name + ".json");
  emit(itr::make_constant_rule(1, "always_treat"), "value_always_treat.json");
  emit(itr::make_constant_rule(0, "never_treat"), "value_never_treat.json");
  write_run_meta(c, "evaluate", started, {});
  return 0;
}

int cmd_rate(const RunConfig& c) {
  const std::string started = timestamp_now();
  if (!c.rate_dgp) throw std::invalid_argument("rate command needs a 'rate' section");
  if (c.rate_replications < 1) throw std::invalid_argument("rate.replications must be >= 1");
  const itr::SynthDgp& dgp = itr::dgp_by_name(*c.rate_dgp);

  itr::FitConfig pipeline = c.fit;
  pipeline.tau = c.tau_given ? c.tau : dgp.tau;
  pipeline.oracle = resolve_oracle(c);

  const itr::RateExperimentReport report = itr::run_rate_experiment(
      dgp, c.rate_n_grid, c.rate_replications, pipeline, c.rate_rule, c.seed, c.threads);

  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "rate_report.json", itr::rate_report_to_json_string(report));
  std::cout << itr::rate_report_table(report);
  write_run_meta(c, "rate", started, {});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individualized treatment rules from censored survival data"};
  app.require_subcommand(1);

  std::string config_path;
  CliOverrides overrides;
  std::uint64_t seed_flag = 0;
  std::string out_flag;
  int threads_flag = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_flag, "override config seed");
    sub->add_option("--out", out_flag, "override output directory");
    sub->add_option("--threads", threads_flag, "worker thread count");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "draw a synthetic cohort");
  CLI::App* fit = app.add_subcommand("fit", "fit candidates and ensembles");
  CLI::App* evaluate = app.add_subcommand("evaluate", "estimate a rule's value on held-out data");
  CLI::App* rate = app.add_subcommand("rate", "regret-vs-sample-size experiment");
  for (CLI::App* sub : {simulate, fit, evaluate, rate}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  for (CLI::App* sub : {simulate, fit, evaluate, rate}) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed") > 0) overrides.seed = seed_flag;
    if (sub->count("--out") > 0) overrides.out = out_flag;
    if (sub->count("--threads") > 0) overrides.threads = threads_flag;
  }

  std::string stage = "config";
  try {
    const RunConfig config = parse_config(config_path, overrides);
    if (simulate->parsed()) {
      stage = "simulate";
      return cmd_simulate(config);
    }
    if (fit->parsed()) {
      stage = "fit";
      return cmd_fit(config);
    }
    if (evaluate->parsed()) {
      stage = "evaluate";
      return cmd_evaluate(config);
    }
    stage = "rate";
    return cmd_rate(config);
  } catch (const std::exception& e) {
    std::cerr << "[" << stage << "] error: " << e.what() << "\n";
    return 1;
  }
}
