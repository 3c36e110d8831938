#include <doctest.h>

#include <cmath>

#include "itr/rng.hpp"
#include "itr/synth.hpp"

using namespace itr;
using Eigen::VectorXd;

namespace {

VectorXd point(double x, double y) {
  VectorXd v(2);
  v << x, y;
  return v;
}

}  // namespace

TEST_CASE("reference process a has the advertised truth") {
  const SynthDgp& dgp = dgp_by_name("a");
  CHECK(dgp.h0(1, 1, point(1, -1)) == 0.2);
  CHECK(dgp.h0(1, 0, point(1, -1)) == 0.5);
  CHECK(true_blip(dgp, point(1, 1)) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(true_blip(dgp, point(-1, 1)) == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(optimal_value(dgp) == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("null process values every rule at zero") {
  const SynthDgp& dgp = dgp_by_name("null");
  for (const auto& w : dgp.w_grid) CHECK(true_blip(dgp, w) == 0.0);
  CHECK(true_value(dgp, [](const VectorXd&) { return 1; }) == 0.0);
  CHECK(optimal_value(dgp) == 0.0);
}

TEST_CASE("optimal rule dominates random rules") {
  const SynthDgp& dgp = dgp_by_name("k3");
  const double best = optimal_value(dgp);
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t mask = rng.next_u64() & 0xF;
    const auto rule = [&dgp, mask](const VectorXd& w) {
      for (std::size_t i = 0; i < dgp.w_grid.size(); ++i) {
        if ((dgp.w_grid[i] - w).norm() < 1e-12) return (mask >> i) & 1 ? 1 : 0;
      }
      return 0;
    };
    CHECK(true_value(dgp, rule) <= best + 1e-12);
  }
}

TEST_CASE("simulation is reproducible and hits forward-model rates") {
  const SynthDgp& dgp = dgp_by_name("b");
  const Cohort c1 = simulate(dgp, 500, 42);
  const Cohort c2 = simulate(dgp, 500, 42);
  CHECK(c1.ids == c2.ids);
  CHECK((c1.w - c2.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c1.a - c2.a).cwiseAbs().maxCoeff() == 0);
  CHECK((c1.t_tilde - c2.t_tilde).cwiseAbs().maxCoeff() == 0);

  SUBCASE("near-certain immediate event") {
    SynthDgp custom = dgp_by_name("a");
    custom.name = "custom";
    custom.h0 = [](int, int, const VectorXd&) { return 0.99; };
    const int n = 10000;
    const Cohort c = simulate(custom, n, 7);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      if (c.delta[i] == 1 && c.t_tilde[i] == 1) ++hits;
    }
    const double rate = static_cast<double>(hits) / n;
    const double se = std::sqrt(0.99 * 0.01 / n);
    CHECK(std::abs(rate - 0.99) < 3.0 * se);
  }
  SUBCASE("zero hazard yields administrative censoring everywhere") {
    SynthDgp custom = dgp_by_name("a");
    custom.name = "custom";
    custom.h0 = [](int, int, const VectorXd&) { return 0.0; };
    const Cohort c = simulate(custom, 200, 3);
    for (int i = 0; i < c.n(); ++i) {
      CHECK(c.delta[i] == 0);
      CHECK(c.t_tilde[i] == c.k_max);
    }
  }
}

TEST_CASE("exhaustive conditional mean certifies double robustness exactly") {
  for (const std::string name : {"a", "b", "k3"}) {
    const SynthDgp& dgp = dgp_by_name(name);
    const NuisanceSet oracle = make_oracle_nuisance(dgp);
    const NuisanceSet bad_h = make_corrupted_nuisance(dgp, Corruption::h);
    const NuisanceSet bad_g = make_corrupted_nuisance(dgp, Corruption::g);
    const NuisanceSet bad_both = make_double_corrupted_nuisance(dgp);
    const NuisanceSet ipw = make_ipw_nuisance(dgp);
    const NuisanceSet gcomp = make_gcomp_nuisance(dgp);

    double worst_both = 0.0;
    for (const auto& w : dgp.w_grid) {
      const double truth = true_blip(dgp, w);
      CHECK(std::abs(exhaustive_conditional_mean_D(dgp, oracle, w) - truth) < 1e-10);
      CHECK(std::abs(exhaustive_conditional_mean_D(dgp, bad_h, w) - truth) < 1e-10);
      CHECK(std::abs(exhaustive_conditional_mean_D(dgp, bad_g, w) - truth) < 1e-10);
      CHECK(std::abs(exhaustive_conditional_mean_D(dgp, ipw, w) - truth) < 1e-10);
      CHECK(std::abs(exhaustive_conditional_mean_D(dgp, gcomp, w) - truth) < 1e-10);
      worst_both =
          std::max(worst_both, std::abs(exhaustive_conditional_mean_D(dgp, bad_both, w) - truth));
    }
    CHECK(worst_both > 0.01);
  }
}

TEST_CASE("population enumeration is a probability measure consistent with the blip") {
  const SynthDgp& dgp = dgp_by_name("b");
  const NuisanceSet oracle = make_oracle_nuisance(dgp);
  const auto atoms = enumerate_population(dgp, oracle);
  double mass = 0.0, mean_d = 0.0;
  for (const auto& atom : atoms) {
    mass += atom.prob;
    mean_d += atom.prob * atom.d;
  }
  double mean_blip = 0.0;
  for (std::size_t i = 0; i < dgp.w_grid.size(); ++i) {
    mean_blip += dgp.w_prob[i] * true_blip(dgp, dgp.w_grid[i]);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_d == doctest::Approx(mean_blip).epsilon(1e-10));
}

TEST_CASE("margin descriptor matches the blip law") {
  const SynthDgp& a = dgp_by_name("a");
  REQUIRE(a.margin == SynthDgp::Margin::bounded_away);
  for (const auto& w : a.w_grid) {
    CHECK(std::abs(true_blip(a, w)) >= a.margin_c - 1e-12);
  }
  // P(0 < theta <= t) jumps only at the margin on the discrete grid.
  for (double t : {0.05, 0.15, 0.25}) {
    double p = 0.0;
    for (std::size_t i = 0; i < a.w_grid.size(); ++i) {
      const double th = true_blip(a, a.w_grid[i]);
      if (th > 0.0 && th <= t) p += a.w_prob[i];
    }
    CHECK(p == 0.0);
  }
}

TEST_CASE("oracle nuisance reproduces the generating hazards pointwise") {
  const SynthDgp& dgp = dgp_by_name("k3");
  const NuisanceSet oracle = make_oracle_nuisance(dgp);
  for (const auto& w : dgp.w_grid) {
    for (int a = 0; a < 2; ++a) {
      for (int m = 1; m <= dgp.k_max; ++m) {
        CHECK(oracle.h(m, a, w) == dgp.h0(m, a, w));
      }
      for (int m = 0; m < dgp.k_max; ++m) {
        CHECK(oracle.g_r(m, a, w) == dgp.gr0(m, a, w));
      }
    }
    CHECK(oracle.g_a.prob1(w) == dgp.ga1(w));
  }
  const NuisanceSet bad_h = make_corrupted_nuisance(dgp, Corruption::h);
  CHECK(bad_h.h(2, 1, dgp.w_grid[0]) == 0.5);
  CHECK(bad_h.g_r(1, 0, dgp.w_grid[0]) == dgp.gr0(1, 0, dgp.w_grid[0]));
  const NuisanceSet bad_g = make_corrupted_nuisance(dgp, Corruption::g);
  CHECK(bad_g.g_a.prob1(dgp.w_grid[1]) == 0.5);
  CHECK(bad_g.g_r(1, 0, dgp.w_grid[0]) == 0.1);
  CHECK(bad_g.h(2, 1, dgp.w_grid[0]) == dgp.h0(2, 1, dgp.w_grid[0]));
}

TEST_CASE("horizon guard on the exhaustive oracle") {
  SynthDgp big = dgp_by_name("a");
  big.name = "big";
  big.k_max = 4;
  big.tau = 4;
  CHECK_THROWS_AS(exhaustive_conditional_mean_D(big, make_oracle_nuisance(big), point(1, 1)),
                  std::invalid_argument);
}
