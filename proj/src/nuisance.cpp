#include "itr/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>

#include "itr/ensemble.hpp"
#include "itr/synth.hpp"

namespace itr {

namespace {

bool table_has_both_arms(const RiskSetTable& table) {
  bool a0 = false, a1 = false;
  for (int a : table.a) {
    if (a == 0) a0 = true;
    if (a == 1) a1 = true;
  }
  return a0 && a1;
}

/// Feature layout for a pooled hazard design over the time range
/// [t_lo, t_hi]. GLMs use per-time indicator columns with t_lo as the
/// baseline level; stumps take time as a numeric coordinate.
struct HazardDesign {
  int t_lo = 0;
  int t_hi = 0;
  bool categorical_time = true;
  bool arm_main = false;
  bool arm_inter = false;
  std::vector<int> cov_cols;

  int dim() const {
    const int time_dim = categorical_time ? std::max(t_hi - t_lo, 0) : 1;
    const int covs = static_cast<int>(cov_cols.size());
    return time_dim + (arm_main ? 1 : 0) + covs + (arm_inter ? covs : 0);
  }

  Eigen::VectorXd make(int m, int a, const Eigen::VectorXd& w) const {
    Eigen::VectorXd x(dim());
    int k = 0;
    if (categorical_time) {
      for (int t = t_lo + 1; t <= t_hi; ++t) x[k++] = m == t ? 1.0 : 0.0;
    } else {
      x[k++] = static_cast<double>(m);
    }
    if (arm_main) x[k++] = static_cast<double>(a);
    for (int c : cov_cols) x[k++] = w[c];
    if (arm_inter) {
      for (int c : cov_cols) x[k++] = static_cast<double>(a) * w[c];
    }
    return x;
  }
};

Eigen::MatrixXd design_matrix(const Cohort& c, const RiskSetTable& table,
                              const std::vector<int>& rows, const HazardDesign& design) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), design.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    x.row(static_cast<Eigen::Index>(i)) =
        design.make(table.m[static_cast<std::size_t>(r)], table.a[static_cast<std::size_t>(r)],
                    c.w.row(table.row[static_cast<std::size_t>(r)]));
  }
  return x;
}

Eigen::VectorXd outcome_vector(const RiskSetTable& table, const std::vector<int>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = table.y[static_cast<std::size_t>(rows[i])];
  }
  return y;
}

std::vector<int> all_rows(const RiskSetTable& table) {
  std::vector<int> rows(table.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return rows;
}

/// Fitted single-learner hazard predictor over a fixed row subset.
std::function<double(int, int, const Eigen::VectorXd&)> fit_hazard_rows(
    const Cohort& c, const RiskSetTable& table, const std::vector<int>& rows,
    const LearnerSpec& spec, double eps_clip) {
  validate_spec(spec);
  if (rows.empty()) throw std::invalid_argument("hazard fit: empty person-period table");

  if (spec.family == Family::intercept_only) {
    // Saturated in time: a shrunken empirical hazard per time point.
    std::map<int, std::pair<double, double>> counts;  // m -> (sum y, n)
    for (int r : rows) {
      auto& cell = counts[table.m[static_cast<std::size_t>(r)]];
      cell.first += table.y[static_cast<std::size_t>(r)];
      cell.second += 1.0;
    }
    std::map<int, double> rate;
    for (const auto& [m, cell] : counts) {
      rate[m] = (cell.first + 0.5) / (cell.second + 1.0);
    }
    return [rate, eps_clip](int m, int, const Eigen::VectorXd&) {
      const auto it = rate.find(m);
      // Never-observed times fall back to the add-half value at zero counts.
      const double p = it == rate.end() ? 0.5 : it->second;
      return clamp_prob(p, eps_clip);
    };
  }

  HazardDesign design;
  design.t_lo = table.t_lo;
  design.t_hi = table.t_hi;
  design.categorical_time = spec.family != Family::stump_boost;
  const bool both_arms = table_has_both_arms(table);
  design.arm_main = both_arms;
  design.arm_inter = both_arms && spec.family == Family::logistic_arm_interactions;

  if (spec.screen_top > 0 && spec.screen_top < c.p()) {
    RiskSetTable view;  // screening sees only the training rows
    view.kind = table.kind;
    view.t_lo = table.t_lo;
    view.t_hi = table.t_hi;
    for (int r : rows) {
      view.row.push_back(table.row[static_cast<std::size_t>(r)]);
      view.m.push_back(table.m[static_cast<std::size_t>(r)]);
      view.a.push_back(table.a[static_cast<std::size_t>(r)]);
      view.y.push_back(table.y[static_cast<std::size_t>(r)]);
    }
    design.cov_cols = screen_covariates(c, view, spec.screen_top);
    std::sort(design.cov_cols.begin(), design.cov_cols.end());
  } else {
    for (int j = 0; j < c.p(); ++j) design.cov_cols.push_back(j);
  }

  const Eigen::MatrixXd x = design_matrix(c, table, rows, design);
  const Eigen::VectorXd y = outcome_vector(table, rows);
  const Eigen::VectorXd w1 = Eigen::VectorXd::Ones(x.rows());

  if (spec.family == Family::stump_boost) {
    auto model = std::make_shared<StumpModel>(
        fit_stump_boost(x, y, w1, Task::binary, spec.boost_rounds, spec.learn_rate));
    return [model, design, eps_clip](int m, int a, const Eigen::VectorXd& w) {
      return clamp_prob(expit(model->score(design.make(m, a, w))), eps_clip);
    };
  }
  auto model = std::make_shared<LinearModel>(fit_glm(x, y, w1, Task::binary));
  return [model, design, eps_clip](int m, int a, const Eigen::VectorXd& w) {
    return clamp_prob(expit(model->score(design.make(m, a, w))), eps_clip);
  };
}

}  // namespace

HazardModel fit_pooled_hazard(const Cohort& c, const RiskSetTable& table,
                              const LearnerSpec& spec, double eps_clip) {
  HazardModel model;
  model.kind = table.kind;
  model.clip_eps = eps_clip;
  model.tag = "pooled:" + spec.name;
  model.fn = fit_hazard_rows(c, table, all_rows(table), spec, eps_clip);
  return model;
}

PropensityModel fit_propensity(const Cohort& c, const LearnerSpec& spec, double eps_clip) {
  validate_spec(spec);
  if (c.n() == 0) throw std::invalid_argument("fit_propensity: empty cohort");
  bool a0 = false, a1 = false;
  for (int i = 0; i < c.n(); ++i) {
    if (c.a[i] == 0) a0 = true;
    if (c.a[i] == 1) a1 = true;
  }
  if (!a0 || !a1) {
    throw std::invalid_argument("fit_propensity: both arms must be present in the training data");
  }
  if (spec.family == Family::logistic_arm_interactions) {
    throw std::invalid_argument("fit_propensity: arm-interaction family is not applicable");
  }

  PropensityModel model;
  model.clip_eps = eps_clip;
  model.tag = "propensity:" + spec.name;

  const Eigen::VectorXd y = c.a.cast<double>();
  if (spec.family == Family::intercept_only) {
    const double p = y.mean();
    model.fn = PropensityModel::from_p1([p](const Eigen::VectorXd&) { return p; });
    return model;
  }
  const Eigen::VectorXd w1 = Eigen::VectorXd::Ones(c.n());
  if (spec.family == Family::stump_boost) {
    auto fit = std::make_shared<StumpModel>(
        fit_stump_boost(c.w, y, w1, Task::binary, spec.boost_rounds, spec.learn_rate));
    model.fn = PropensityModel::from_p1(
        [fit](const Eigen::VectorXd& w) { return expit(fit->score(w)); });
    return model;
  }
  auto fit = std::make_shared<LinearModel>(fit_glm(c.w, y, w1, Task::binary));
  model.fn = PropensityModel::from_p1(
      [fit](const Eigen::VectorXd& w) { return expit(fit->score(w)); });
  return model;
}

std::vector<int> screen_covariates(const Cohort& c, const RiskSetTable& table, int keep) {
  const int p = c.p();
  if (keep > p) throw std::invalid_argument("screen_covariates: keep exceeds dimension");
  if (keep < 1) throw std::invalid_argument("screen_covariates: keep must be >= 1");

  std::vector<double> tstat(static_cast<std::size_t>(p), 0.0);
  for (int j = 0; j < p; ++j) {
    double n1 = 0, n0 = 0, s1 = 0, s0 = 0, q1 = 0, q0 = 0;
    for (std::size_t r = 0; r < table.size(); ++r) {
      const double x = c.w(table.row[r], j);
      if (table.y[r] > 0.5) {
        n1 += 1;
        s1 += x;
        q1 += x * x;
      } else {
        n0 += 1;
        s0 += x;
        q0 += x * x;
      }
    }
    if (n1 < 1 || n0 < 1) continue;  // one-class table: all scores stay 0
    const double m1 = s1 / n1;
    const double m0 = s0 / n0;
    const double v1 = n1 > 1 ? std::max(q1 - n1 * m1 * m1, 0.0) / (n1 - 1) : 0.0;
    const double v0 = n0 > 1 ? std::max(q0 - n0 * m0 * m0, 0.0) / (n0 - 1) : 0.0;
    const double denom = std::sqrt(v1 / n1 + v0 / n0);
    if (denom == 0.0) {
      // Zero variance: separated means dominate, equal means score zero.
      tstat[static_cast<std::size_t>(j)] =
          m1 == m0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      tstat[static_cast<std::size_t>(j)] = std::abs((m1 - m0) / denom);
    }
  }

  std::vector<int> order(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) order[static_cast<std::size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ta = tstat[static_cast<std::size_t>(a)];
    const double tb = tstat[static_cast<std::size_t>(b)];
    if (ta != tb) return ta > tb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(keep));
  return order;
}

namespace {

struct ArmEnsemble {
  std::vector<std::function<double(int, int, const Eigen::VectorXd&)>> parts;
  Eigen::VectorXd alpha;

  double predict(int m, int a, const Eigen::VectorXd& w) const {
    double p = 0.0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      p += alpha[static_cast<Eigen::Index>(j)] * parts[j](m, a, w);
    }
    return p;
  }
};

/// Super learner for one (component, arm): out-of-fold candidate
/// probabilities feed the simplex NLL solver, then every candidate is
/// refit on all rows.
ArmEnsemble fit_arm_superlearner(const Cohort& c, const RiskSetTable& table,
                                 const std::vector<int>& rows,
                                 const std::vector<LearnerSpec>& specs, const FoldPlan& folds,
                                 double eps_clip, std::vector<double>* weights_out) {
  const int j = static_cast<int>(specs.size());
  ArmEnsemble out;

  if (j == 1) {
    out.alpha = Eigen::VectorXd::Ones(1);
    out.parts.push_back(fit_hazard_rows(c, table, rows, specs[0], eps_clip));
    if (weights_out) *weights_out = {1.0};
    return out;
  }

  Eigen::MatrixXd probs(static_cast<Eigen::Index>(rows.size()), j);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = table.y[static_cast<std::size_t>(rows[i])];
  }

  for (int fold = 0; fold < folds.k; ++fold) {
    std::vector<int> train_rows, val_rows, val_pos;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int subject = table.row[static_cast<std::size_t>(rows[i])];
      if (folds.assignment[static_cast<std::size_t>(subject)] == fold) {
        val_rows.push_back(rows[i]);
        val_pos.push_back(static_cast<int>(i));
      } else {
        train_rows.push_back(rows[i]);
      }
    }
    if (val_rows.empty()) continue;
    if (train_rows.empty()) {
      throw std::invalid_argument(
          "nuisance super learner: a training fold has no person-period rows; "
          "use fewer folds or stratified folds");
    }
    for (int s = 0; s < j; ++s) {
      const auto fit = fit_hazard_rows(c, table, train_rows, specs[static_cast<std::size_t>(s)],
                                       eps_clip);
      for (std::size_t v = 0; v < val_rows.size(); ++v) {
        const int r = val_rows[v];
        probs(val_pos[v], s) = fit(table.m[static_cast<std::size_t>(r)],
                                   table.a[static_cast<std::size_t>(r)],
                                   c.w.row(table.row[static_cast<std::size_t>(r)]));
      }
    }
  }

  const EnsembleWeights weights = solve_bernoulli_weights(probs, y);
  out.alpha = weights.alpha;
  for (int s = 0; s < j; ++s) {
    out.parts.push_back(fit_hazard_rows(c, table, rows, specs[static_cast<std::size_t>(s)],
                                        eps_clip));
  }
  if (weights_out) {
    weights_out->assign(out.alpha.data(), out.alpha.data() + out.alpha.size());
  }
  return out;
}

/// Splits the table rows by arm; per-arm fitting is mandatory for h and
/// g_R, so the single-arm subtables drop arm terms naturally.
HazardModel fit_hazard_superlearner(const Cohort& c, const RiskSetTable& table,
                                    const std::vector<LearnerSpec>& specs, const FoldPlan& folds,
                                    double eps_clip, const std::string& component,
                                    std::vector<NuisanceWeightEntry>* entries) {
  HazardModel model;
  model.kind = table.kind;
  model.clip_eps = eps_clip;
  model.tag = "superlearner:" + component;

  if (table.t_hi < table.t_lo) {
    // tau leaves this hazard with no fitting range (never queried).
    model.fn = [](int, int, const Eigen::VectorXd&) { return 0.5; };
    return model;
  }

  std::vector<int> rows0, rows1;
  for (std::size_t r = 0; r < table.size(); ++r) {
    (table.a[r] == 1 ? rows1 : rows0).push_back(static_cast<int>(r));
  }
  if (rows0.empty() || rows1.empty()) {
    throw std::invalid_argument("nuisance super learner: component '" + component +
                                "' has no person-period rows in one arm");
  }

  auto ens0 = std::make_shared<ArmEnsemble>();
  auto ens1 = std::make_shared<ArmEnsemble>();
  std::vector<double> w0, w1;
  *ens0 = fit_arm_superlearner(c, table, rows0, specs, folds, eps_clip, &w0);
  *ens1 = fit_arm_superlearner(c, table, rows1, specs, folds, eps_clip, &w1);

  if (entries) {
    for (std::size_t s = 0; s < specs.size(); ++s) {
      entries->push_back({component, 0, specs[s].name, w0[s]});
    }
    for (std::size_t s = 0; s < specs.size(); ++s) {
      entries->push_back({component, 1, specs[s].name, w1[s]});
    }
  }

  model.fn = [ens0, ens1](int m, int a, const Eigen::VectorXd& w) {
    return a == 1 ? ens1->predict(m, 1, w) : ens0->predict(m, 0, w);
  };
  return model;
}

}  // namespace

NuisanceSet fit_nuisance_superlearner(const Cohort& train, const std::vector<LearnerSpec>& specs,
                                      const FoldPlan& folds, int tau, double eps_clip,
                                      const LearnerSpec& propensity_spec) {
  if (specs.empty()) throw std::invalid_argument("nuisance super learner: empty library");
  if (folds.n() != train.n()) {
    throw std::invalid_argument("nuisance super learner: fold plan size mismatch");
  }
  for (const auto& spec : specs) validate_spec(spec);

  const RiskSetExpansion tables = expand_risk_sets(train, tau);

  NuisanceSet eta;
  eta.id = "fitted:n" + std::to_string(train.n()) + ":seed" + std::to_string(folds.seed);
  eta.h = fit_hazard_superlearner(train, tables.event, specs, folds, eps_clip, "h",
                                  &eta.weight_table);
  eta.g_r = fit_hazard_superlearner(train, tables.cens, specs, folds, eps_clip, "g_r",
                                    &eta.weight_table);
  eta.g_a = fit_propensity(train, propensity_spec, eps_clip);
  return eta;
}

namespace {

NuisanceSet oracle_base(const SynthDgp& dgp, const std::string& id) {
  NuisanceSet eta;
  eta.id = id;
  eta.h.kind = HazardKind::event;
  eta.h.fn = dgp.h0;
  eta.h.tag = id + ":h";
  eta.g_r.kind = HazardKind::censoring;
  eta.g_r.fn = dgp.gr0;
  eta.g_r.tag = id + ":g_r";
  eta.g_a.fn = PropensityModel::from_p1(dgp.ga1);
  eta.g_a.tag = id + ":g_a";
  return eta;
}

}  // namespace

NuisanceSet make_oracle_nuisance(const SynthDgp& dgp) {
  return oracle_base(dgp, "oracle:" + dgp.name);
}

NuisanceSet make_corrupted_nuisance(const SynthDgp& dgp, Corruption which) {
  if (which == Corruption::h) {
    NuisanceSet eta = oracle_base(dgp, "corrupt_h:" + dgp.name);
    eta.h.fn = [](int, int, const Eigen::VectorXd&) { return 0.5; };
    return eta;
  }
  NuisanceSet eta = oracle_base(dgp, "corrupt_g:" + dgp.name);
  eta.g_a.fn = PropensityModel::from_p1([](const Eigen::VectorXd&) { return 0.5; });
  eta.g_r.fn = [](int, int, const Eigen::VectorXd&) { return 0.1; };
  return eta;
}

NuisanceSet make_double_corrupted_nuisance(const SynthDgp& dgp) {
  NuisanceSet eta = make_corrupted_nuisance(dgp, Corruption::g);
  eta.id = "corrupt_both:" + dgp.name;
  eta.h.fn = [](int, int, const Eigen::VectorXd&) { return 0.5; };
  return eta;
}

NuisanceSet make_ipw_nuisance(const SynthDgp& dgp) {
  NuisanceSet eta = oracle_base(dgp, "ipw:" + dgp.name);
  eta.h.fn = [](int, int, const Eigen::VectorXd&) { return 1.0; };
  return eta;
}

NuisanceSet make_gcomp_nuisance(const SynthDgp& dgp) {
  NuisanceSet eta = oracle_base(dgp, "gcomp:" + dgp.name);
  eta.g_a.fn = [](int, const Eigen::VectorXd&) { return 1.0; };
  eta.g_r.fn = [](int, int, const Eigen::VectorXd&) { return 0.0; };
  return eta;
}

}  // namespace itr
