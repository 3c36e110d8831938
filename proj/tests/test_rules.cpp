#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "itr/folds.hpp"
#include "itr/rng.hpp"
#include "itr/rules.hpp"
#include "itr/synth.hpp"

using namespace itr;
using Eigen::VectorXd;

namespace {

HazardModel hazard_fn(std::function<double(int, int, const Eigen::VectorXd&)> fn,
                      HazardKind kind = HazardKind::event) {
  HazardModel h;
  h.kind = kind;
  h.fn = std::move(fn);
  return h;
}

NuisanceSet flat_eta(std::function<double(int, int, const Eigen::VectorXd&)> h) {
  NuisanceSet eta;
  eta.id = "engineered";
  eta.h = hazard_fn(std::move(h));
  eta.g_r = hazard_fn([](int, int, const Eigen::VectorXd&) { return 0.0; },
                      HazardKind::censoring);
  eta.g_a.fn = PropensityModel::from_p1([](const Eigen::VectorXd&) { return 0.5; });
  return eta;
}

Subject subj(const std::string& id, int a, int delta, int t, double z) {
  Subject s;
  s.id = id;
  s.a = a;
  s.delta = delta;
  s.t_tilde = t;
  s.w.resize(1);
  s.w << z;
  return s;
}

VectorXd point1(double z) {
  VectorXd v(1);
  v << z;
  return v;
}

/// Weighted-logistic oracle: exhaustive grid over (intercept, slope).
std::pair<double, double> grid_logistic(const std::vector<double>& z,
                                        const std::vector<double>& y,
                                        const std::vector<double>& w) {
  double best = std::numeric_limits<double>::infinity();
  double b0 = 0, b1 = 0;
  for (double i0 = -20.0; i0 <= 20.0; i0 += 0.1) {
    for (double i1 = -20.0; i1 <= 20.0; i1 += 0.1) {
      double nll = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double eta = i0 + i1 * z[k];
        const double log1pe = eta > 30 ? eta : std::log1p(std::exp(eta));
        nll += w[k] * (log1pe - y[k] * eta);
      }
      nll += 0.5e-6 * i1 * i1;
      if (nll < best) {
        best = nll;
        b0 = i0;
        b1 = i1;
      }
    }
  }
  return {b0, b1};
}

}  // namespace

TEST_CASE("blip regression candidates") {
  SUBCASE("zero arm contrast yields the all-zeros rule under the strict threshold") {
    const HazardModel h =
        hazard_fn([](int, int, const Eigen::VectorXd&) { return 0.4; });
    std::vector<Subject> subjects;
    for (int i = 0; i < 20; ++i) subjects.push_back(subj("s" + std::to_string(i), i % 2, 0, 2,
                                                         -1.0 + 0.1 * i));
    const Cohort c = make_cohort(subjects, 2);
    const DecisionFunction rule =
        fit_b_reg(c, h, 2, {"glm", Family::logistic_main_effects}, {}, "b");
    for (int i = 0; i < c.n(); ++i) {
      CHECK(std::abs(rule.score(c.w.row(i))) < 1e-12);
      CHECK(rule.decide(c.w.row(i)) == 0);
    }
  }
  SUBCASE("intercept-only regression returns the mean blip") {
    const HazardModel h = hazard_fn([](int m, int a, const Eigen::VectorXd& w) {
      return a == 1 ? 0.2 + 0.05 * w[0] + 0.01 * m : 0.5;
    });
    std::vector<Subject> subjects;
    for (int i = 0; i < 10; ++i) subjects.push_back(subj("s" + std::to_string(i), i % 2, 0, 2,
                                                         -0.9 + 0.2 * i));
    const Cohort c = make_cohort(subjects, 2);
    const DecisionFunction rule =
        fit_b_reg(c, h, 2, {"mean", Family::intercept_only}, {}, "b");
    double mean = 0.0;
    for (int i = 0; i < c.n(); ++i) mean += blip_value(h, 2, c.w.row(i)) / c.n();
    CHECK(rule.score(point1(123.0)) == doctest::Approx(mean).epsilon(1e-12));
  }
  SUBCASE("sign agreement with the generating blip on a grid") {
    const SynthDgp& dgp = dgp_by_name("a_cont");
    const Cohort c = simulate(dgp, 5000, 2024);
    const NuisanceSet eta = make_oracle_nuisance(dgp);
    for (const auto spec :
         {LearnerSpec{"glm", Family::logistic_main_effects},
          LearnerSpec{"stumps", Family::stump_boost, 150, 0.2}}) {
      const DecisionFunction b_rule = fit_b_reg(c, eta.h, 2, spec, {}, "b");
      const DecisionFunction d_rule = fit_d_reg(c, eta, 2, spec, {}, "d");
      int agree_b = 0, agree_d = 0, total = 0;
      for (double z1 = -0.95; z1 <= 0.95; z1 += 0.1) {
        for (double z2 = -0.95; z2 <= 0.95; z2 += 0.1) {
          VectorXd w(2);
          w << z1, z2;
          const int truth = true_blip(dgp, w) > 0 ? 1 : 0;
          agree_b += b_rule.decide(w) == truth ? 1 : 0;
          agree_d += d_rule.decide(w) == truth ? 1 : 0;
          ++total;
        }
      }
      CHECK(agree_b >= static_cast<int>(0.9 * total));
      CHECK(agree_d >= static_cast<int>(0.9 * total));
    }
  }
}

TEST_CASE("transformation regression on constant targets returns that constant") {
  // h = 0.15 on both arms, tau 2, all subjects untreated-free survivors:
  // D = p + q = 0.3 for everyone.
  const NuisanceSet eta = flat_eta([](int, int, const Eigen::VectorXd&) { return 0.15; });
  std::vector<Subject> subjects;
  for (int i = 0; i < 12; ++i) {
    subjects.push_back(subj("s" + std::to_string(i), 1, 0, 2, -1.0 + 0.2 * i));
  }
  const Cohort c = make_cohort(subjects, 2);
  const DecisionFunction rule =
      fit_d_reg(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "d");
  CHECK(rule.score(point1(0.33)) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(std::abs(rule.f.linear.coef[0]) < 1e-9);
}

TEST_CASE("training-row permutation leaves the fit unchanged") {
  const SynthDgp& dgp = dgp_by_name("b");
  const Cohort c = simulate(dgp, 80, 8);
  const NuisanceSet eta = make_oracle_nuisance(dgp);
  std::vector<int> perm(static_cast<std::size_t>(c.n()));
  for (int i = 0; i < c.n(); ++i) perm[static_cast<std::size_t>(i)] = c.n() - 1 - i;
  const Cohort flipped = c.subset(perm);
  const DecisionFunction r1 =
      fit_d_reg(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "d");
  const DecisionFunction r2 =
      fit_d_reg(flipped, eta, 2, {"glm", Family::logistic_main_effects}, {}, "d");
  for (const auto& w : dgp.w_grid) {
    CHECK(r1.score(w) == doctest::Approx(r2.score(w)).epsilon(1e-9));
  }
}

TEST_CASE("weighted classification of the transformation sign") {
  SUBCASE("all labels positive gives a constant positive score") {
    // h = 0.2 both arms: untreated-free survivors have D = 0.4 > 0.
    const NuisanceSet eta = flat_eta([](int, int, const Eigen::VectorXd&) { return 0.2; });
    std::vector<Subject> subjects;
    for (int i = 0; i < 8; ++i) {
      subjects.push_back(subj("s" + std::to_string(i), 1, 0, 2, -1.0 + 0.25 * i));
    }
    const Cohort c = make_cohort(subjects, 2);
    const DecisionFunction rule =
        fit_d_class(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "dc");
    CHECK(rule.f.type == Predictor::Type::constant);
    CHECK(rule.score(point1(-5.0)) > 0.0);
    CHECK(rule.decide(point1(7.0)) == 1);
  }
  SUBCASE("unit weights reduce to plain classification") {
    // h = 0.5: D is exactly +1 for survivors and -1 for events, so the
    // classification weights are all one.
    const NuisanceSet eta = flat_eta([](int, int, const Eigen::VectorXd&) { return 0.5; });
    std::vector<Subject> subjects;
    std::vector<double> zs, ys;
    for (int i = 0; i < 14; ++i) {
      const double z = -1.3 + 0.2 * i;
      const int label = z > 0.1 ? 1 : 0;  // survivors above the cut
      subjects.push_back(subj("s" + std::to_string(i), 1, label == 1 ? 0 : 1,
                              label == 1 ? 2 : 1, z));
      zs.push_back(z);
      ys.push_back(label);
    }
    const Cohort c = make_cohort(subjects, 2);
    const DecisionFunction rule =
        fit_d_class(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "dc");
    Eigen::MatrixXd zmat(14, 1);
    Eigen::VectorXd yvec(14);
    for (int i = 0; i < 14; ++i) {
      zmat(i, 0) = zs[static_cast<std::size_t>(i)];
      yvec[i] = ys[static_cast<std::size_t>(i)];
    }
    const LinearModel direct = fit_glm(zmat, yvec, Eigen::VectorXd::Ones(14), Task::binary);
    CHECK(rule.f.linear.intercept == doctest::Approx(direct.intercept).epsilon(1e-10));
    CHECK(rule.f.linear.coef[0] == doctest::Approx(direct.coef[0]).epsilon(1e-10));
  }
  SUBCASE("a heavy mislabeled point flips the boundary") {
    // Separable labels 0,0,1,1 on z = -2,-1,1,2 (|D| = 0.4) plus a heavy
    // mislabeled point at z = 3 with label 0 and |D| = 1.9.
    const NuisanceSet eta = flat_eta([](int, int, const Eigen::VectorXd& w) {
      if (w[0] > 2.5) return 0.05;          // D = -1.9 at z = 3
      if (w[0] < 0.0) return 0.8;           // D = -0.4 events
      return 0.2;                           // D = +0.4 survivors
    });
    const std::vector<Subject> subjects = {
        subj("s1", 1, 1, 1, -2.0), subj("s2", 1, 1, 1, -1.0), subj("s3", 1, 0, 2, 1.0),
        subj("s4", 1, 0, 2, 2.0),  subj("s5", 1, 1, 1, 3.0)};
    const Cohort c = make_cohort(subjects, 2);
    const DecisionFunction weighted =
        fit_d_class(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "dc");

    // Unweighted counterpart on the same labels.
    Eigen::MatrixXd zmat(5, 1);
    Eigen::VectorXd yvec(5);
    const double zpts[5] = {-2, -1, 1, 2, 3};
    const double ypts[5] = {0, 0, 1, 1, 0};
    for (int i = 0; i < 5; ++i) {
      zmat(i, 0) = zpts[i];
      yvec[i] = ypts[i];
    }
    const LinearModel unweighted =
        fit_glm(zmat, yvec, Eigen::VectorXd::Ones(5), Task::binary);
    CHECK(unweighted.intercept + unweighted.coef[0] * 2.0 > 0.0);  // z=2 kept positive
    CHECK(weighted.decide(point1(2.0)) == 0);                      // flipped by the heavy point

    // Exact grid-search oracle for the weighted likelihood agrees on signs.
    const auto [b0, b1] =
        grid_logistic({-2, -1, 1, 2, 3}, {0, 0, 1, 1, 0}, {0.4, 0.4, 0.4, 0.4, 1.9});
    for (const double z : {-2.0, -1.0, 1.0, 2.0, 3.0}) {
      CHECK((b0 + b1 * z > 0.0) == (weighted.score(point1(z)) > 0.0));
    }
  }
}

TEST_CASE("rule assembly") {
  const DecisionFunction plus = make_constant_rule(1, "always");
  const DecisionFunction minus = make_constant_rule(0, "never");
  SUBCASE("vertex weights reproduce a candidate pointwise") {
    const SynthDgp& dgp = dgp_by_name("a");
    const Cohort c = simulate(dgp, 60, 12);
    const NuisanceSet eta = make_oracle_nuisance(dgp);
    const DecisionFunction d1 =
        fit_d_reg(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "d1");
    const DecisionFunction d2 =
        fit_d_class(c, eta, 2, {"stump", Family::stump_boost, 25, 0.2}, {}, "d2");
    EnsembleWeights w;
    w.alpha = Eigen::Vector2d(0.0, 1.0);
    const DecisionFunction ens = assemble_rule({d1, d2}, w, "ens");
    for (const auto& wpt : dgp.w_grid) {
      CHECK(ens.score(wpt) == d2.score(wpt));
    }
  }
  SUBCASE("perfect tie scores zero and maps to no-treatment") {
    EnsembleWeights w;
    w.alpha = Eigen::Vector2d(0.5, 0.5);
    const DecisionFunction ens = assemble_rule({plus, minus}, w, "tie");
    CHECK(ens.score(point1(0.0)) == 0.0);
    CHECK(ens.decide(point1(0.0)) == 0);
  }
  SUBCASE("scaling every candidate leaves the induced rule unchanged") {
    const SynthDgp& dgp = dgp_by_name("a");
    const Cohort c = simulate(dgp, 60, 13);
    const NuisanceSet eta = make_oracle_nuisance(dgp);
    DecisionFunction d1 = fit_d_reg(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "x");
    DecisionFunction doubled = d1;
    doubled.f.linear.intercept *= 2.0;
    doubled.f.linear.coef *= 2.0;
    EnsembleWeights w;
    w.alpha = Eigen::VectorXd::Ones(1);
    const DecisionFunction e1 = assemble_rule({d1}, w, "e1");
    const DecisionFunction e2 = assemble_rule({doubled}, w, "e2");
    for (const auto& wpt : dgp.w_grid) {
      CHECK(e2.score(wpt) == doctest::Approx(2.0 * e1.score(wpt)));
      CHECK(e1.decide(wpt) == e2.decide(wpt));
    }
  }
  SUBCASE("length mismatch is rejected") {
    EnsembleWeights w;
    w.alpha = Eigen::Vector2d(0.5, 0.5);
    CHECK_THROWS_AS(assemble_rule({plus}, w, "bad"), std::invalid_argument);
  }
}

TEST_CASE("value estimation identities") {
  // h = 0.5 makes every transformation value exactly +-1, so sums are
  // integers and the additivity identity is exact in floating point.
  const NuisanceSet eta = flat_eta([](int, int, const Eigen::VectorXd&) { return 0.5; });
  std::vector<Subject> subjects;
  for (int i = 0; i < 8; ++i) {
    const bool event = i % 3 == 0;
    subjects.push_back(subj("e" + std::to_string(i), i % 2, event ? 1 : 0, event ? 1 : 2,
                            -0.7 + 0.2 * i));
  }
  const Cohort c = make_cohort(subjects, 2);

  const DecisionFunction never = make_constant_rule(0, "never_treat");
  const DecisionFunction always = make_constant_rule(1, "always_treat");
  const ValueEstimate v_never = estimate_value(never, c, eta, 2);
  const ValueEstimate v_always = estimate_value(always, c, eta, 2);

  SUBCASE("never-treat is exactly zero") {
    CHECK(v_never.v_hat == 0.0);
    CHECK(v_never.se_hat == 0.0);
  }
  SUBCASE("always-treat is exactly the mean transformation") {
    const auto values = dr_transform_all(c, eta, 2);
    double mean = 0.0;
    for (const auto& v : values) mean += v.d;
    mean /= static_cast<double>(c.n());
    CHECK(v_always.v_hat == mean);
  }
  SUBCASE("value additivity for a rule and its complement") {
    DecisionFunction rule = make_constant_rule(1, "thresh");
    rule.f.type = Predictor::Type::linear;
    rule.f.z_cols = {0};
    rule.f.linear.intercept = -0.05;
    rule.f.linear.coef = VectorXd::Ones(1);
    DecisionFunction complement = rule;
    complement.name = "anti";
    complement.f.linear.intercept = 0.05;
    complement.f.linear.coef = -VectorXd::Ones(1);
    // complement.decide == 1 - rule.decide at every sample point
    for (int i = 0; i < c.n(); ++i) {
      CHECK(complement.decide(c.w.row(i)) == 1 - rule.decide(c.w.row(i)));
    }
    const double lhs = estimate_value(rule, c, eta, 2).v_hat +
                       estimate_value(complement, c, eta, 2).v_hat;
    CHECK(lhs == v_always.v_hat);
  }
  SUBCASE("training/evaluation overlap is rejected") {
    const SynthDgp& dgp = dgp_by_name("a");
    const Cohort train = simulate(dgp, 50, 1);
    const DecisionFunction fitted =
        fit_d_reg(train, make_oracle_nuisance(dgp), 2, {"glm", Family::logistic_main_effects},
                  {}, "d");
    CHECK_THROWS_AS(estimate_value(fitted, train, make_oracle_nuisance(dgp), 2),
                    std::invalid_argument);
  }
}

TEST_CASE("oracle-nuisance value estimate recovers the optimal value") {
  const SynthDgp& dgp = dgp_by_name("a");
  const Cohort eval = simulate(dgp, 20000, 314);
  const NuisanceSet eta = make_oracle_nuisance(dgp);
  DecisionFunction opt = make_constant_rule(1, "sign_rule");
  opt.f.type = Predictor::Type::linear;
  opt.f.z_cols = {0, 1};
  opt.f.linear.intercept = 0.0;
  opt.f.linear.coef = Eigen::Vector2d(1.0, 0.0);  // 1{w1 > 0}
  const ValueEstimate est = estimate_value(opt, eval, eta, 2);
  CHECK(std::abs(est.v_hat - 0.15) < 3.0 * est.se_hat);
  CHECK(est.se_hat > 0.0);
  CHECK(est.se_hat < 0.02);
}

TEST_CASE("regret against the generating process") {
  const SynthDgp& dgp = dgp_by_name("a");
  DecisionFunction opt = make_constant_rule(1, "opt");
  opt.f.type = Predictor::Type::linear;
  opt.f.z_cols = {0, 1};
  opt.f.linear.intercept = 0.0;
  opt.f.linear.coef = Eigen::Vector2d(1.0, 0.0);
  CHECK(regret(opt, dgp) == doctest::Approx(0.0).epsilon(1e-12));

  DecisionFunction flipped = opt;
  flipped.f.linear.coef = Eigen::Vector2d(-1.0, 0.0);
  flipped.f.linear.intercept = 1e-9;  // keeps w1=+1 strictly negative side
  CHECK(regret(flipped, dgp) == doctest::Approx(0.3).epsilon(1e-9));

  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    DecisionFunction random_rule = opt;
    random_rule.f.linear.intercept = rng.uniform(-1.0, 1.0);
    random_rule.f.linear.coef = Eigen::Vector2d(rng.normal(), rng.normal());
    CHECK(regret(random_rule, dgp) >= -1e-12);
  }
}

TEST_CASE("rule serialization re-evaluates bit-identically") {
  const SynthDgp& dgp = dgp_by_name("b");
  const Cohort c = simulate(dgp, 150, 9);
  const NuisanceSet eta = make_oracle_nuisance(dgp);
  std::vector<DecisionFunction> rules;
  rules.push_back(fit_b_reg(c, eta.h, 2, {"glm", Family::logistic_main_effects}, {}, "b1"));
  rules.push_back(fit_d_reg(c, eta, 2, {"stump", Family::stump_boost, 40, 0.15}, {}, "d1"));
  rules.push_back(fit_d_class(c, eta, 2, {"glm", Family::logistic_main_effects}, {}, "c1"));
  EnsembleWeights w;
  w.alpha = Eigen::Vector3d(0.2, 0.5, 0.3);
  rules.push_back(assemble_rule({rules[0], rules[1], rules[2]}, w, "ens"));

  Rng rng(77);
  for (const auto& rule : rules) {
    const DecisionFunction back = rule_from_json_string(rule_to_json_string(rule));
    CHECK(back.name == rule.name);
    CHECK(back.tau == rule.tau);
    CHECK(back.training_ids == rule.training_ids);
    for (int trial = 0; trial < 25; ++trial) {
      VectorXd wpt(2);
      wpt << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
      CHECK(back.score(wpt) == rule.score(wpt));
    }
  }

  const std::string path = "/tmp/itr_rule.json";
  write_rule_json(rules[3], path);
  const DecisionFunction loaded = read_rule_json(path);
  CHECK(loaded.score(dgp.w_grid[2]) == rules[3].score(dgp.w_grid[2]));
  std::remove(path.c_str());
}
