#include <benchmark/benchmark.h>

#include "stochlyap/catalog.hpp"
#include "stochlyap/hjb.hpp"
#include "stochlyap/sde.hpp"

using namespace stochlyap;

namespace {

double square(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

Grid grid_for(std::size_t dim, std::size_t cells) {
  if (dim == 1) return Grid({-2.0}, {2.0}, {cells});
  return Grid({-1.5, -1.5}, {1.5, 1.5}, {cells, cells});
}

}  // namespace

// Stencil assembly plus one max_u sweep.
static void BM_Hamiltonian(benchmark::State& state) {
  const std::string model = state.range(0) == 1 ? "multiplicative_1d" : "correlated_2d";
  const auto dyn = make_dynamics(model);
  const Grid grid = grid_for(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const DiscreteOperator op(dyn, grid, default_controls(model));
  const auto w = ScalarField::sample(grid, square);
  for (auto _ : state) benchmark::DoNotOptimize(discrete_hamiltonian(w, op));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.node_count()));
}
BENCHMARK(BM_Hamiltonian)->Args({1, 400})->Args({1, 1600})->Args({2, 64})->Args({2, 128});

static void BM_OperatorAssembly(benchmark::State& state) {
  const auto dyn = make_dynamics("correlated_2d");
  const Grid grid = grid_for(2, static_cast<std::size_t>(state.range(0)));
  const auto controls = default_controls("correlated_2d");
  for (auto _ : state) benchmark::DoNotOptimize(DiscreteOperator(dyn, grid, controls));
}
BENCHMARK(BM_OperatorAssembly)->Arg(64)->Arg(128);

static void BM_ObstacleSolve(benchmark::State& state) {
  const std::string model = state.range(0) == 1 ? "multiplicative_1d" : "rotation_2d";
  const Grid grid = grid_for(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const DiscreteOperator op(make_dynamics(model), grid, default_controls(model));
  const ObstacleProblem prob{0.1, ScalarField(grid, 0.05), ScalarField::sample(grid, square)};
  std::size_t iterations = 0;
  for (auto _ : state) {
    const auto sol = solve_obstacle(prob, op);
    iterations = sol.report.iterations;
    benchmark::DoNotOptimize(sol.value.max());
  }
  state.counters["policy_iterations"] = static_cast<double>(iterations);
}
BENCHMARK(BM_ObstacleSolve)->Args({1, 400})->Args({2, 40})->Args({2, 80})->Unit(benchmark::kMillisecond);

static void BM_InfiniteHorizon(benchmark::State& state) {
  const Grid grid = grid_for(1, static_cast<std::size_t>(state.range(0)));
  const DiscreteOperator op(make_dynamics("multiplicative_1d"), grid, default_controls("multiplicative_1d"));
  const auto l = ScalarField::sample(grid, square);
  InfiniteHorizonOptions opts;
  opts.boundary_values = l;
  for (auto _ : state) benchmark::DoNotOptimize(solve_infinite_horizon(l, op, opts).value.max());
}
BENCHMARK(BM_InfiniteHorizon)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_Simulate(benchmark::State& state) {
  const auto dyn = make_dynamics("multiplicative_1d");
  const auto controls = default_controls("multiplicative_1d");
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  cfg.n_paths = static_cast<std::size_t>(state.range(0));
  cfg.seed = 1;
  cfg.x0 = {0.3};
  cfg.stop_radius = 1.0;
  cfg.report_interval = 0.1;
  cfg.workers = static_cast<std::size_t>(state.range(1));
  const Observables obs{{}, square, square};
  for (auto _ : state) benchmark::DoNotOptimize(simulate_paths(dyn, ControlLaw::constant(controls, 0), cfg, obs));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_Simulate)->Args({1000, 1})->Args({1000, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
