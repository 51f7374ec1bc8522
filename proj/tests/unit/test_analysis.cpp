#include <doctest.h>

#include <cmath>

#include "stochlyap/analysis.hpp"
#include "stochlyap/catalog.hpp"
#include "support.hpp"

using namespace stochlyap;
using testing_support::scalar_dynamics;
using testing_support::square;

namespace {

CheckSetup benchmark_setup(double lo, double hi, std::size_t cells, std::size_t paths, double horizon,
                           double sigma0 = 1.0) {
  SimConfig sim;
  sim.dt = 1e-3;
  sim.horizon = horizon;
  sim.n_paths = paths;
  sim.seed = 2024;
  sim.report_interval = horizon / 4.0;
  return {make_dynamics("multiplicative_1d", {{"sigma0", sigma0}}), default_controls("multiplicative_1d"),
          Grid({lo}, {hi}, {cells}), {}, sim, 1e-8, "test"};
}

LyapunovCandidate quadratic(double scale = 1.0, bool strict = true) {
  LyapunovCandidate c;
  c.value = [scale](auto x) { return scale * square(x); };
  if (strict) c.cost = square;
  c.flavor = strict ? Flavor::LocalStrict : Flavor::Local;
  return c;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("exit bound arithmetic") {
  const auto setup = benchmark_setup(-2, 2, 200, 200, 1.0);
  const auto r = lyapunov_stability_check(setup, quadratic(), 1.0, {{0.1}, {0.0}});
  CHECK(r.verdict == Verdict::Pass);
  CHECK(r.find("exit_bound[x0=0.1]").value == doctest::Approx(0.01));
  CHECK(r.find("exit_bound[x0=0]").value == 0.0);
  CHECK(r.find("exit_probability[x0=0]").value == 0.0);
  CHECK(r.find("bound_nondecreasing_in_distance").value == 1.0);
}

TEST_CASE("a non-supersolution is indeterminate and not simulated") {
  const auto setup = benchmark_setup(-2, 2, 200, 200, 1.0, 1.5);  // needs sigma0^2 <= 1
  const auto r = lyapunov_stability_check(setup, quadratic(), 1.0, {{0.3}});
  CHECK(r.verdict == Verdict::Indeterminate);
  CHECK_THROWS_AS(r.find("exit_probability[x0=0.3]"), std::out_of_range);
}

TEST_CASE("lagrange ratios") {
  SUBCASE("R = 1, S = 10") {
    const auto setup = benchmark_setup(-10, 10, 400, 100, 0.5);
    const auto r = lagrange_stability_check(setup, quadratic(1.0, false), 1.0, {10.0});
    CHECK(r.find("ratio[S=10]").value == doctest::Approx(0.01));
  }
  SUBCASE("S = R is vacuous") {
    const auto setup = benchmark_setup(-2, 2, 200, 100, 0.5);
    const auto r = lagrange_stability_check(setup, quadratic(1.0, false), 1.0, {1.0});
    CHECK(r.verdict == Verdict::Vacuous);
  }
  SUBCASE("S beyond the domain is indeterminate") {
    const auto setup = benchmark_setup(-2, 2, 200, 100, 0.5);
    const auto r = lagrange_stability_check(setup, quadratic(1.0, false), 1.0, {3.0});
    CHECK(r.verdict == Verdict::Indeterminate);
  }
}

TEST_CASE("representation with V = l = 0") {
  auto setup = benchmark_setup(-2, 2, 100, 50, 0.5);
  LyapunovCandidate zero;
  zero.value = [](auto) { return 0.0; };
  const auto r = representation_check(setup, zero, {{0.4}});
  CHECK(r.verdict == Verdict::Pass);
  CHECK(r.find("payoff_hjb[x0=0.4]").value == 0.0);
}

TEST_CASE("minimality") {
  const auto setup = benchmark_setup(-2, 2, 200, 10, 0.1);
  const auto grid = setup.grid;
  SUBCASE("l = 0: V_inf = 0 sits below any nonnegative V") {
    const auto r = minimality_check(setup, ScalarField::sample(grid, square), ScalarField(grid, 0.0));
    CHECK(r.verdict == Verdict::Pass);
  }
  SUBCASE("V = 2 x^2 strictly dominates") {
    const auto l = ScalarField::sample(grid, square);
    const auto v = ScalarField::sample(grid, [](auto x) { return 2.0 * square(x); });
    const auto r = minimality_check(setup, v, l);
    CHECK(r.verdict == Verdict::Pass);
    // V_inf = x^2 + |x|^3 / 2 with V on the boundary, so the gap peaks near 0.59.
    CHECK(r.find("max_V_minus_Vinf").value > 0.5);
  }
  SUBCASE("V = x^2 is the minimal one") {
    const auto l = ScalarField::sample(grid, square);
    const auto r = minimality_check(setup, l, l);
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.find("band_relative_gap").value <= 0.02);
  }
}

TEST_CASE("subsolution value with constant U") {
  const auto setup = benchmark_setup(-2, 2, 100, 50, 0.5);
  LyapunovCandidate u;
  u.value = [](auto) { return 0.75; };
  const auto r = subsolution_value_check(setup, u, {{0.3}});
  CHECK(r.verdict == Verdict::Pass);
  CHECK(r.find("inf_payoff_min[x0=0.3]").value == 0.75);
}

TEST_CASE("attractor with M = {0} reproduces the origin numbers") {
  const auto setup = benchmark_setup(-2, 2, 200, 400, 2.0);
  const auto cand = quadratic();
  const auto a = attractor_check(setup, cand, origin_target(), 1.0, {{0.3}});
  const auto s = lyapunov_stability_check(setup, cand, 1.0, {{0.3}});
  const auto m = supermartingale_check(setup, cand, 1.0, {0.3});
  CHECK(a.find("exit_probability[x0=0.3]").value == s.find("exit_probability[x0=0.3]").value);
  CHECK(a.find("exit_probability[x0=0.3]").tolerance == s.find("exit_probability[x0=0.3]").tolerance);
  CHECK(a.find("max_standardized_increment").value == m.find("max_standardized_increment").value);
  CHECK(a.find("payoff_at_T").value == m.find("payoff_at_T").value);
}

TEST_CASE("attractor with an interval target") {
  // Noise proportional to d(x, M) so V = d^2 stays a supersolution on M's edge.
  const double half = 0.2;
  const DistanceFn d = [half](auto x) { return std::max(0.0, std::abs(x[0]) - half); };
  auto setup = benchmark_setup(-2, 2, 200, 200, 1.0);
  setup.dyn = scalar_dynamics([](double x, double u) { return u * x; },
                              [half](double x, double) { return std::max(0.0, std::abs(x) - half); });
  setup.controls = ControlSet::scalars({-1.0});
  LyapunovCandidate c;
  c.value = [d](auto x) { return d(x) * d(x); };
  c.flavor = Flavor::Local;
  const auto r = attractor_check(setup, c, {d, 1e-12, "[-0.2, 0.2]"}, 0.8, {{0.5}});
  CHECK(r.verdict == Verdict::Pass);
  CHECK(r.find("exit_bound[x0=0.5]").value == doctest::Approx(0.09 / 0.64).epsilon(1e-9));
  CHECK(r.find("distance_lipschitz_ratio").value <= 1.0 + 1e-12);
  CHECK(r.find("target_nodes").value >= 20.0);
}

TEST_CASE("small intensity condition") {
  const Grid grid({-2.0}, {2.0}, {400});
  const std::vector<IntensityEntry> table{{0.1, 2.0}};
  const auto controls = default_controls("multiplicative_1d");
  SUBCASE("no noise passes for any L") {
    const auto r = small_intensity_check(square, table, make_dynamics("multiplicative_1d", {{"sigma0", 0.0}}), controls, grid);
    CHECK(r.verdict == Verdict::Pass);
  }
  SUBCASE("sigma0 = 1 passes") {
    const auto r = small_intensity_check(square, table, make_dynamics("multiplicative_1d", {{"sigma0", 1.0}}), controls, grid);
    CHECK(r.verdict == Verdict::Pass);
  }
  SUBCASE("sigma0 = 2 fails at every node with |x| > delta") {
    const auto r = small_intensity_check(square, table, make_dynamics("multiplicative_1d", {{"sigma0", 2.0}}), controls, grid);
    CHECK(r.verdict == Verdict::Fail);
    CHECK(r.find("nodes_failing[delta=0.1,C=2]").value == r.find("nodes_checked[delta=0.1,C=2]").value);
  }
}

TEST_CASE("radial condition") {
  const Grid grid({-2.0}, {2.0}, {200});
  const auto one = ControlSet::scalars({0.0});
  SUBCASE("f = -x, sigma = 0 passes for every gamma") {
    const auto dyn = scalar_dynamics([](double x, double) { return -x; }, [](double, double) { return 0.0; });
    for (double g : {0.5, 1.0, 2.0}) CHECK(radial_condition_check(g, dyn, one, grid).verdict == Verdict::Pass);
  }
  SUBCASE("f = +x fails everywhere off the origin") {
    const auto dyn = scalar_dynamics([](double x, double) { return x; }, [](double, double) { return 0.0; });
    const auto r = radial_condition_check(2.0, dyn, one, grid);
    CHECK(r.verdict == Verdict::Fail);
    CHECK(r.find("nodes_failing[gamma=2]").value == 200.0);
  }
  SUBCASE("gamma outside (0, 2] throws") {
    const auto dyn = make_dynamics("multiplicative_1d");
    CHECK_THROWS_AS(radial_condition_check(2.5, dyn, one, grid), std::invalid_argument);
    CHECK_THROWS_AS(radial_condition_check(0.0, dyn, one, grid), std::invalid_argument);
  }
  SUBCASE("at gamma = 2 the off-radial part of sigma does not matter") {
    // Same Frobenius norm, different |sigma^T x|^2.
    const Grid g2({-1.0, -0.4}, {1.0, 0.4}, {10, 4});
    const auto drift = [](auto x, auto, auto out) { out[0] = -x[0]; out[1] = -x[1]; };
    const auto radial = testing_support::constant_noise(2, 2, {0.8, 0.0, 0.0, 0.0}, drift);
    const auto tangential = testing_support::constant_noise(2, 2, {0.0, 0.0, 0.0, 0.8}, drift);
    const auto a = radial_condition_check(2.0, radial, one, g2), b = radial_condition_check(2.0, tangential, one, g2);
    CHECK(a.find("min_condition_over_r2[gamma=2]").value == b.find("min_condition_over_r2[gamma=2]").value);
    const auto c = radial_condition_check(1.0, radial, one, g2), d = radial_condition_check(1.0, tangential, one, g2);
    CHECK(c.find("min_condition_over_r2[gamma=1]").value != d.find("min_condition_over_r2[gamma=1]").value);
  }
}

TEST_CASE("modulus and occupation checks on the benchmark") {
  const auto setup = benchmark_setup(-2, 2, 200, 300, 2.0);
  const auto m = modulus_bound_check(setup, quadratic(), 1.0, {{0.3}}, 1.0, 0.1, 0.5);
  CHECK(m.verdict == Verdict::Vacuous);
  CHECK(m.find("modulus_bound[x0=0.3]").value == doctest::Approx(3.28));
  const auto o = occupation_time_check(setup, quadratic(), 1.0, {{0.3}}, 0.5);
  CHECK(o.verdict == Verdict::Pass);
  CHECK(o.find("occupation_bound[x0=0.3]").value == doctest::Approx(0.36));
  const auto no_cost = occupation_time_check(setup, quadratic(1.0, false), 1.0, {{0.3}}, 0.5);
  CHECK(no_cost.verdict == Verdict::Indeterminate);
}

TEST_CASE("shell and ball helpers") {
  const Grid grid({-1.0}, {1.0}, {10});
  const auto v = ScalarField::sample(grid, square);
  const DistanceFn norm = [](auto x) { return std::abs(x[0]); };
  CHECK(*shell_min(v, norm, 0.5) == doctest::Approx(0.36));
  CHECK(*ball_max(v, norm, 0.5) == doctest::Approx(0.16));
  CHECK_FALSE(shell_min(v, norm, 1.5).has_value());
}

}
