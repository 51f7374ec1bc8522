#include <doctest.h>

#include <cmath>
#include <random>

#include "stochlyap/catalog.hpp"
#include "stochlyap/hjb.hpp"
#include "support.hpp"

using namespace stochlyap;
using testing_support::constant_noise;
using testing_support::scalar_dynamics;

namespace {

const auto kSignControls = ControlSet::scalars({-1.0, 1.0});

Dynamics signed_drift_no_noise() {
  return scalar_dynamics([](double x, double u) { return u * x; }, [](double, double) { return 0.0; });
}

}  // namespace

TEST_SUITE("hjb") {

TEST_CASE("constant W has zero Hamiltonian") {
  const auto dyn = make_dynamics("correlated_2d", {{"s", 0.5}, {"rho", 0.4}});
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {12, 10});
  const DiscreteOperator op(dyn, grid, default_controls("correlated_2d"));
  const auto h = discrete_hamiltonian(ScalarField(grid, 3.25), op);
  for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(std::abs(h.value[n]) <= 1e-12);
}

TEST_CASE("f = u x, sigma = 0, W = x^2 gives 2 x^2 up to O(h)") {
  for (auto scheme : {DriftScheme::Upwind, DriftScheme::CentralWhereMonotone}) {
    const Grid grid({-1.0}, {1.0}, {200});
    const DiscreteOperator op(signed_drift_no_noise(), grid, kSignControls, {scheme});
    const auto w = ScalarField::sample(grid, testing_support::square);
    const auto h = discrete_hamiltonian(w, op);
    const double dx = grid.spacing(0);
    for (std::size_t n = 1; n + 1 < grid.node_count(); ++n) {
      const double x = grid.coordinate(n)[0];
      CHECK(std::abs(h.value[n] - 2.0 * x * x) <= std::abs(x) * dx + 1e-12);
    }
  }
}

TEST_CASE("f = 0, a = 1, W = x^2 gives -2 exactly") {
  const auto dyn = make_dynamics("constant", {{"c", 0.0}, {"s", std::sqrt(2.0)}});
  const Grid grid({-1.0}, {1.0}, {50});
  const DiscreteOperator op(dyn, grid, default_controls("constant"));
  const auto h = discrete_hamiltonian(ScalarField::sample(grid, testing_support::square), op);
  for (std::size_t n = 1; n + 1 < grid.node_count(); ++n) CHECK(h.value[n] == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("weights are nonnegative on every catalog model") {
  for (const auto& name : catalog_names()) {
    CAPTURE(name);
    const auto dyn = make_dynamics(name);
    std::vector<double> lo(dyn.dim_state, -2.0), hi(dyn.dim_state, 2.0);
    std::vector<std::size_t> cells(dyn.dim_state, dyn.dim_state == 1 ? 80 : 14);
    const Grid grid(lo, hi, cells);
    for (auto scheme : {DriftScheme::Upwind, DriftScheme::CentralWhereMonotone}) {
      const DiscreteOperator op(dyn, grid, default_controls(name), {scheme});
      for (std::size_t n = 0; n < grid.node_count(); ++n) {
        for (std::size_t c = 0; c < op.control_count(); ++c) {
          for (double w : op.weights(n, c)) CHECK(w >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("dominant cross terms flag nodes instead of producing negative weights") {
  // a = s^2/2 [[1 + rho^2, rho], [rho, 1]]: the second axial weight goes
  // negative once |rho| > 1.
  const auto dyn = make_dynamics("correlated_2d", {{"s", 1.0}, {"rho", 2.0}});
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {8, 8});
  const DiscreteOperator op(dyn, grid, default_controls("correlated_2d"));
  CHECK(op.flagged_nodes().size() > 0);
  for (auto n : op.flagged_nodes()) {
    CHECK_FALSE(grid.is_boundary(n));
    for (double w : op.weights(n, 0)) CHECK(w >= 0.0);
  }
  const auto ok = make_dynamics("correlated_2d", {{"s", 1.0}, {"rho", 0.5}});
  CHECK(DiscreteOperator(ok, grid, default_controls("correlated_2d")).flagged_nodes().empty());
}

TEST_CASE("monotone: raising a neighbour never raises H at the node") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  struct Case {
    Dynamics dyn;
    ControlSet controls;
    Grid grid;
  };
  std::vector<Case> cases;
  cases.push_back({make_dynamics("multiplicative_1d"), default_controls("multiplicative_1d"), Grid({-2.0}, {2.0}, {40})});
  cases.push_back({make_dynamics("correlated_2d", {{"rho", -0.6}}), default_controls("correlated_2d"),
                   Grid({-1.0, -1.0}, {1.0, 1.0}, {10, 12})});
  cases.push_back({make_dynamics("rotation_2d"), default_controls("rotation_2d"), Grid({-1.0, -1.0}, {1.0, 1.0}, {9, 9})});
  for (const auto& cs : cases) {
    for (auto scheme : {DriftScheme::Upwind, DriftScheme::CentralWhereMonotone}) {
      const DiscreteOperator op(cs.dyn, cs.grid, cs.controls, {scheme});
      std::vector<double> w(cs.grid.node_count());
      for (auto& v : w) v = val(rng);
      const ScalarField base(cs.grid, w);
      const auto h0 = discrete_hamiltonian(base, op);
      for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<std::size_t> pick(0, cs.grid.node_count() - 1);
        const std::size_t node = pick(rng);
        if (cs.grid.is_boundary(node)) continue;
        std::uniform_int_distribution<std::size_t> s(0, op.stencil_size() - 1);
        const auto nb = static_cast<std::size_t>(op.neighbor(node, s(rng)));
        auto bumped = w;
        bumped[nb] += 0.5;
        const auto h1 = discrete_hamiltonian(ScalarField(cs.grid, bumped), op);
        CHECK(h1.value[node] <= h0.value[node] + 1e-12);
      }
    }
  }
}

TEST_CASE("verify_supersolution examples") {
  const Grid grid({-1.0}, {1.0}, {100});
  const auto v = ScalarField::sample(grid, testing_support::square);
  SUBCASE("V = x^2, l = 0, f = u x, sigma = 0") {
    const DiscreteOperator op(signed_drift_no_noise(), grid, kSignControls);
    const auto rep = verify_supersolution(v, ScalarField(grid, 0.0), op);
    CHECK(rep.all_passed);
    CHECK(rep.min_residual >= 0.0);
  }
  SUBCASE("V = l = x^2 on the benchmark is tight") {
    const DiscreteOperator op(make_dynamics("multiplicative_1d", {{"sigma0", 1.0}}), grid, kSignControls);
    const auto rep = verify_supersolution(v, v, op);
    CHECK(rep.all_passed);
    CHECK(std::abs(rep.min_residual) <= 1e-8);
  }
  SUBCASE("V = 0 with positive l fails everywhere") {
    const DiscreteOperator op(signed_drift_no_noise(), grid, kSignControls);
    const auto rep = verify_supersolution(ScalarField(grid, 0.0), ScalarField(grid, 0.5), op);
    CHECK_FALSE(rep.all_passed);
    CHECK(rep.failing_nodes.size() == grid.node_count() - 2);
  }
}

TEST_CASE("extract_policy examples") {
  const Grid grid({-1.0}, {1.0}, {20});
  const auto v = ScalarField::sample(grid, testing_support::square);
  SUBCASE("u = -1 wherever x != 0") {
    const DiscreteOperator op(make_dynamics("multiplicative_1d", {{"sigma0", 0.5}}), grid, kSignControls);
    const auto p = extract_policy(v, op);
    for (std::size_t n = 1; n + 1 < grid.node_count(); ++n) {
      if (grid.coordinate(n)[0] != 0.0) CHECK(p[n] == 0);
    }
  }
  SUBCASE("control-independent dynamics pick index 0") {
    const auto dyn = scalar_dynamics([](double x, double) { return -x; }, [](double x, double) { return 0.3 * x; });
    const DiscreteOperator op(dyn, grid, ControlSet::scalars({2.0, 1.0, 0.0}));
    const auto p = extract_policy(v, op);
    for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(p[n] == 0);
  }
  SUBCASE("singleton control set") {
    const DiscreteOperator op(signed_drift_no_noise(), grid, ControlSet::scalars({0.25}));
    const auto p = extract_policy(v, op);
    for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(p[n] == 0);
  }
}

TEST_CASE("policy consistency: H under the extracted policy equals the max") {
  const auto dyn = make_dynamics("rotation_2d", {{"c", 0.3}, {"sigma0", 0.4}});
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {16, 16});
  const DiscreteOperator op(dyn, grid, default_controls("rotation_2d"));
  const auto w = ScalarField::sample(grid, [](auto x) { return x[0] * x[0] + 2.0 * x[1] * x[1] + x[0] * x[1]; });
  const auto h = discrete_hamiltonian(w, op);
  const auto under = hamiltonian_under_policy(w, extract_policy(w, op), op);
  for (std::size_t n = 0; n < grid.node_count(); ++n) CHECK(under[n] == h.value[n]);
}

TEST_CASE("Hamiltonian does not depend on the worker count") {
  const auto dyn = make_dynamics("correlated_2d");
  const Grid grid({-1.0, -1.0}, {1.0, 1.0}, {30, 30});
  const auto w = ScalarField::sample(grid, [](auto x) { return std::cos(3 * x[0]) * x[1]; });
  const DiscreteOperator one(dyn, grid, default_controls("correlated_2d"), {DriftScheme::CentralWhereMonotone, CrossDerivativeRule::SignSplit, 1});
  const DiscreteOperator four(dyn, grid, default_controls("correlated_2d"), {DriftScheme::CentralWhereMonotone, CrossDerivativeRule::SignSplit, 4});
  const auto a = discrete_hamiltonian(w, one), b = discrete_hamiltonian(w, four);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    CHECK(a.value[n] == b.value[n]);
    CHECK(a.argmax[n] == b.argmax[n]);
  }
}

}
