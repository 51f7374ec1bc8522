#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "stochlyap/catalog.hpp"
#include "stochlyap/hjb.hpp"
#include "support.hpp"

using namespace stochlyap;
using testing_support::scalar_dynamics;

namespace {

const auto kSign = ControlSet::scalars({-1.0, 1.0});

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("l = 0 with a constant obstacle returns the obstacle") {
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {10, 10});
  const DiscreteOperator op(make_dynamics("correlated_2d"), grid, default_controls("correlated_2d"));
  for (double lambda : {1.0, 0.1, 0.01}) {
    ObstacleProblem prob{lambda, ScalarField(grid, 2.5), ScalarField(grid, 0.0)};
    const auto sol = solve_obstacle(prob, op);
    CHECK(sol.report.converged);
    for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(sol.value[n] == doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("zero obstacle and zero cost give zero") {
  const Grid grid({-2.0}, {2.0}, {40});
  const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, kSign);
  const auto sol = solve_obstacle({0.3, ScalarField(grid, 0.0), ScalarField(grid, 0.0)}, op);
  for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(std::abs(sol.value[n]) <= 1e-14);
}

TEST_CASE("preconditions") {
  const Grid grid({-1.0}, {1.0}, {10});
  const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, kSign);
  CHECK_THROWS_AS(solve_obstacle({0.0, std::nullopt, ScalarField(grid, 1.0)}, op), std::invalid_argument);
  CHECK_THROWS_AS(solve_obstacle({0.1, std::nullopt, ScalarField(grid, -1.0)}, op), std::invalid_argument);
}

TEST_CASE("matches the Gauss-Seidel reference on 1-D instances") {
  struct Case {
    Dynamics dyn;
    std::vector<double> controls;
  };
  const std::vector<Case> cases = {
      {make_dynamics("multiplicative_1d", {{"sigma0", 0.8}}), {-1.0, 1.0}},
      {make_dynamics("linear_1d", {{"a", 0.5}, {"b", 1.0}, {"s", 0.3}, {"m", 0.2}}), {-1.0, 0.0, 1.0}},
      {make_dynamics("sine_1d", {{"s", 0.4}}), {0.0}},
  };
  const std::size_t cells = 40;
  const Grid grid({-2.0}, {2.0}, {cells});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& cs : cases) {
    const auto controls = ControlSet::scalars(cs.controls);
    const DiscreteOperator op(cs.dyn, grid, controls, {DriftScheme::Upwind});
    std::vector<double> l(grid.node_count()), psi(grid.node_count());
    for (std::size_t n = 0; n < l.size(); ++n) {
      const double x = grid.coordinate(n)[0];
      l[n] = x * x + 0.2 * unit(rng);
      psi[n] = 0.5 * std::cos(2 * x) + 0.3 * unit(rng);
    }
    for (bool with_obstacle : {false, true}) {
      CAPTURE(cs.dyn.name);
      CAPTURE(with_obstacle);
      const double lambda = 0.5;
      ObstacleProblem prob{lambda, std::nullopt, ScalarField(grid, l)};
      std::vector<double> boundary{0.0, 0.0};
      if (with_obstacle) {
        prob.obstacle = ScalarField(grid, psi);
        boundary = {psi.front(), psi.back()};
      } else {
        prob.boundary_rule = BoundaryRule::Prescribed;
        prob.boundary_values = ScalarField(grid, 0.0);
      }
      const auto sol = solve_obstacle(prob, op, {1e-12});
      const auto ref = oracle::obstacle_1d(cs.dyn, -2.0, 2.0, cells, cs.controls, lambda, l,
                                           with_obstacle ? std::optional(psi) : std::nullopt, boundary);
      for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(sol.value[n] == doctest::Approx(ref[n]).epsilon(1e-8));
    }
  }
}

TEST_CASE("complementarity and obstacle domination on a 2-D instance") {
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {20, 20});
  const DiscreteOperator op(make_dynamics("rotation_2d", {{"c", 0.5}, {"sigma0", 0.6}}), grid,
                            default_controls("rotation_2d"));
  const auto l = ScalarField::sample(grid, testing_support::square);
  const auto psi = ScalarField::sample(grid, [](auto x) { return 0.3 - x[0] * x[1]; });
  const ObstacleProblem prob{0.2, psi, l};
  const auto sol = solve_obstacle(prob, op);
  CHECK(sol.report.converged);
  const auto res = complementarity_residual(sol.value, prob, op);
  CHECK(res.max() <= 1e-8);
  for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(sol.value[n] >= psi[n] - 1e-8);
  bool some_active = false, some_free = false;
  for (auto a : sol.obstacle_active) (a ? some_active : some_free) = true;
  CHECK(some_active);
  CHECK(some_free);
}

TEST_CASE("rounding-level policy ties do not stall policy iteration") {
  // On this grid four nodes used to flip between two controls forever.
  const Grid grid({-1.5, -1.5}, {1.5, 1.5}, {80, 80});
  const DiscreteOperator op(make_dynamics("rotation_2d"), grid, default_controls("rotation_2d"));
  const ObstacleProblem prob{0.1, ScalarField(grid, 0.05), ScalarField::sample(grid, testing_support::square)};
  const auto sol = solve_obstacle(prob, op);
  CHECK(sol.report.converged);
  CHECK(sol.report.method == "policy-iteration");
  CHECK(sol.report.iterations < 50);
  CHECK(complementarity_residual(sol.value, prob, op).max() <= 1e-8);
}

TEST_CASE("solver output is independent of the worker count") {
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {24, 24});
  const auto dyn = make_dynamics("correlated_2d", {{"rho", 0.4}});
  const auto l = ScalarField::sample(grid, testing_support::square);
  const ObstacleProblem prob{0.1, ScalarField(grid, 0.05), l};
  const DiscreteOperator one(dyn, grid, default_controls("correlated_2d"), {DriftScheme::CentralWhereMonotone, CrossDerivativeRule::SignSplit, 1});
  const DiscreteOperator three(dyn, grid, default_controls("correlated_2d"), {DriftScheme::CentralWhereMonotone, CrossDerivativeRule::SignSplit, 3});
  const auto a = solve_obstacle(prob, one), b = solve_obstacle(prob, three);
  for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(a.value[n] == b.value[n]);
  CHECK(a.policy == b.policy);
}

TEST_CASE("vanishing discount") {
  const Grid grid({-2.0}, {2.0}, {80});
  const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, kSign);
  const std::vector<double> lambdas{0.5, 0.1, 0.02};

  SUBCASE("constant ladder with l = 0 stays constant") {
    const std::vector<ScalarField> ladder(3, ScalarField(grid, 1.5));
    const auto res = vanishing_discount(ScalarField(grid, 0.0), lambdas, ladder, op);
    for (const auto& row : res.table) {
      for (const auto& f : row) CHECK(max_abs_diff(f, ScalarField(grid, 1.5)) <= 1e-12);
    }
    CHECK_FALSE(res.flagged);
  }
  SUBCASE("single lambda and obstacle equals solve_obstacle") {
    const auto l = ScalarField::sample(grid, testing_support::square);
    const std::vector<double> one{0.1};
    const std::vector<ScalarField> ladder{ScalarField(grid, 0.0)};
    const auto res = vanishing_discount(l, one, ladder, op);
    const auto direct = solve_obstacle({0.1, ScalarField(grid, 0.0), l}, op);
    for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(res.value[n] == direct.value[n]);
  }
  SUBCASE("benchmark fields increase toward x^2 as lambda falls") {
    const auto l = ScalarField::sample(grid, testing_support::square);
    const std::vector<ScalarField> ladder{ScalarField(grid, 0.0)};
    const auto res = vanishing_discount(l, lambdas, ladder, op);
    CHECK(res.max_discount_violation <= 1e-8);
    for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(res.table[0][2][n] <= l[n] + 1e-8);
  }
  SUBCASE("schedule and ladder preconditions") {
    const std::vector<ScalarField> ladder{ScalarField(grid, 0.0)};
    const std::vector<double> increasing{0.1, 0.5};
    CHECK_THROWS_AS(vanishing_discount(ScalarField(grid, 0.0), increasing, ladder, op), std::invalid_argument);
    const std::vector<ScalarField> down{ScalarField(grid, 1.0), ScalarField(grid, 0.0)};
    CHECK_THROWS_AS(vanishing_discount(ScalarField(grid, 0.0), lambdas, down, op), std::invalid_argument);
  }
}

TEST_CASE("infinite horizon") {
  const Grid grid({-2.0}, {2.0}, {200});
  SUBCASE("l = 0 gives 0") {
    const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, kSign);
    const auto res = solve_infinite_horizon(ScalarField(grid, 0.0), op);
    CHECK(res.converged);
    CHECK(res.value.max() == 0.0);
  }
  SUBCASE("a bump the flow never reaches costs nothing") {
    const auto dyn = scalar_dynamics([](double x, double u) { return u * x; }, [](double, double) { return 0.0; });
    const DiscreteOperator op(dyn, grid, ControlSet::scalars({-1.0}), {DriftScheme::Upwind});
    const auto l = ScalarField::sample(grid, [](auto x) { return std::abs(x[0]) > 1.8 ? 1.0 : 0.0; });
    const auto res = solve_infinite_horizon(l, op);
    CHECK(res.converged);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      if (std::abs(grid.coordinate(n)[0]) < 1.8) CHECK(std::abs(res.value[n]) <= 1e-15);
    }
  }
  SUBCASE("benchmark is x^2 within 2% on the interior band") {
    const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, kSign);
    const auto l = ScalarField::sample(grid, testing_support::square);
    InfiniteHorizonOptions opts;
    opts.boundary_values = l;
    const auto res = solve_infinite_horizon(l, op, opts);
    CHECK(res.converged);
    CHECK_FALSE(res.diverged);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      const double x = std::abs(grid.coordinate(n)[0]);
      if (x >= 0.1 && x <= 1.5) CHECK(std::abs(res.value[n] - x * x) <= 0.02 * x * x);
    }
  }
  SUBCASE("cost at an absorbing point diverges") {
    const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, kSign);
    InfiniteHorizonOptions opts;
    opts.divergence_cap = 1e6;
    const auto res = solve_infinite_horizon(ScalarField(grid, 1.0), op, opts);
    CHECK(res.diverged);
    CHECK_FALSE(res.converged);
    CHECK(res.message.find("infinite") != std::string::npos);
  }
}

}
