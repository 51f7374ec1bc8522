#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "stochlyap/digest.hpp"
#include "stochlyap/hjb.hpp"
#include "stochlyap/parallel.hpp"

namespace stochlyap {

namespace {

constexpr double kTieEps = 16.0 * std::numeric_limits<double>::epsilon();

struct Prepared {
  std::vector<double> boundary;  // Dirichlet data per node (used on boundary nodes only)
  const std::vector<double>* obstacle = nullptr;
  std::vector<double> obstacle_storage;
  std::vector<double> cost;
};

Prepared prepare(const ObstacleProblem& p, const DiscreteOperator& op) {
  const Grid& g = op.grid();
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
    throw std::invalid_argument(
        "solve_obstacle: lambda must be positive; reach lambda = 0 through vanishing_discount");
  }
  if (!(p.running_cost.grid() == g)) throw std::invalid_argument("running cost grid mismatch");
  Prepared out;
  out.cost.assign(p.running_cost.values().begin(), p.running_cost.values().end());
  for (double v : out.cost) {
    if (v < 0.0) throw std::invalid_argument("running cost must be nonnegative");
  }
  if (p.obstacle) {
    if (!(p.obstacle->grid() == g)) throw std::invalid_argument("obstacle grid mismatch");
    out.obstacle_storage.assign(p.obstacle->values().begin(), p.obstacle->values().end());
    out.obstacle = &out.obstacle_storage;
  }
  if (p.boundary_rule == BoundaryRule::ObstacleValue) {
    if (!p.obstacle) {
      throw std::invalid_argument("boundary rule 'obstacle value' needs an obstacle");
    }
    out.boundary = out.obstacle_storage;
  } else {
    if (!p.boundary_values) {
      throw std::invalid_argument("boundary rule 'prescribed' needs boundary values");
    }
    if (!(p.boundary_values->grid() == g)) throw std::invalid_argument("boundary grid mismatch");
    out.boundary.assign(p.boundary_values->values().begin(), p.boundary_values->values().end());
  }
  return out;
}

// G_c(W)(x) = (lambda + D_c) W(x) - sum_s w_s W(y_s) - l(x), i.e. lambda W + H_c(W) - l.
double continuation(const DiscreteOperator& op, double lambda, std::size_t node, std::size_t c,
                    const std::vector<double>& w, double l) {
  return lambda * w[node] + op.apply(node, c, w) - l;
}

double local_scale(const DiscreteOperator& op, double lambda, std::size_t node, std::size_t c,
                   const std::vector<double>& w, double l) {
  const auto wt = op.weights(node, c);
  double s = (lambda + op.total_rate(node, c)) * std::abs(w[node]) + std::abs(l);
  for (std::size_t k = 0; k < wt.size(); ++k) {
    if (wt[k] != 0.0) s += wt[k] * std::abs(w[static_cast<std::size_t>(op.neighbor(node, k))]);
  }
  return s;
}

// Solves the linear system for fixed control and stop choices.
bool solve_linear(const DiscreteOperator& op, double lambda, const Prepared& prep,
                  const std::vector<std::uint32_t>& control, const std::vector<std::uint8_t>& stop,
                  std::vector<double>& w) {
  const Grid& g = op.grid();
  const auto nodes = static_cast<Eigen::Index>(g.node_count());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.node_count() * (op.stencil_size() + 1));
  Eigen::VectorXd rhs(nodes);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    const auto row = static_cast<Eigen::Index>(node);
    if (g.is_boundary(node)) {
      trip.emplace_back(row, row, 1.0);
      rhs[row] = prep.boundary[node];
      continue;
    }
    if (stop[node]) {
      trip.emplace_back(row, row, 1.0);
      rhs[row] = (*prep.obstacle)[node];
      continue;
    }
    const std::size_t c = control[node];
    trip.emplace_back(row, row, lambda + op.total_rate(node, c));
    const auto wt = op.weights(node, c);
    for (std::size_t s = 0; s < wt.size(); ++s) {
      if (wt[s] != 0.0) trip.emplace_back(row, static_cast<Eigen::Index>(op.neighbor(node, s)), -wt[s]);
    }
    rhs[row] = prep.cost[node];
  }
  Eigen::SparseMatrix<double> m(nodes, nodes);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) return false;
  for (Eigen::Index i = 0; i < nodes; ++i) {
    if (!std::isfinite(x[i])) return false;
    w[static_cast<std::size_t>(i)] = x[i];
  }
  return true;
}

// Howard on the control choice with the stop set frozen. Returns false if the
// linear solve failed or the iteration cap was hit. In exact arithmetic a
// policy never comes back; when one does, the switching nodes are tied to
// rounding and the current field is kept.
bool improve_controls(const DiscreteOperator& op, double lambda, const Prepared& prep,
                      std::vector<std::uint32_t>& control, const std::vector<std::uint8_t>& stop,
                      std::vector<double>& w, std::size_t max_iter, std::size_t& iterations) {
  const Grid& g = op.grid();
  std::set<std::uint64_t> seen;
  for (std::size_t it = 0; it < max_iter; ++it) {
    if (!seen.insert(fnv1a64(std::string_view(reinterpret_cast<const char*>(control.data()),
                                               control.size() * sizeof(std::uint32_t))))
             .second) {
      return true;
    }
    if (!solve_linear(op, lambda, prep, control, stop, w)) return false;
    ++iterations;
    std::vector<std::uint8_t> changed(g.node_count(), 0);
    parallel_for(g.node_count(), op.params().workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t node = begin; node < end; ++node) {
        if (g.is_boundary(node) || stop[node]) continue;
        const double l = prep.cost[node];
        const std::uint32_t old = control[node];
        const double g_old = continuation(op, lambda, node, old, w, l);
        double best = g_old;
        std::uint32_t best_c = old;
        for (std::size_t c = 0; c < op.control_count(); ++c) {
          const double v = continuation(op, lambda, node, c, w, l);
          if (v > best) {
            best = v;
            best_c = static_cast<std::uint32_t>(c);
          }
        }
        if (best_c != old && best - g_old > kTieEps * (1.0 + local_scale(op, lambda, node, best_c, w, l))) {
          control[node] = best_c;
          changed[node] = 1;
        }
      }
    });
    if (std::none_of(changed.begin(), changed.end(), [](std::uint8_t c) { return c != 0; })) {
      return true;
    }
  }
  return false;
}

double max_continuation(const DiscreteOperator& op, double lambda, std::size_t node,
                        const std::vector<double>& w, double l) {
  double best = continuation(op, lambda, node, 0, w, l);
  for (std::size_t c = 1; c < op.control_count(); ++c) {
    best = std::max(best, continuation(op, lambda, node, c, w, l));
  }
  return best;
}

double residual_inf(const DiscreteOperator& op, double lambda, const Prepared& prep,
                    const std::vector<double>& w) {
  const Grid& g = op.grid();
  double r = 0.0;
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    double v;
    if (g.is_boundary(node)) {
      v = std::abs(w[node] - prep.boundary[node]);
    } else {
      double cont = max_continuation(op, lambda, node, w, prep.cost[node]);
      if (prep.obstacle) cont = std::min(cont, w[node] - (*prep.obstacle)[node]);
      v = std::abs(cont);
    }
    r = std::max(r, v);
  }
  return r;
}

// Damped Jacobi: W(x) <- max(psi, min_c (l + sum w W(y)) / (lambda + D_c)).
std::size_t value_iteration(const DiscreteOperator& op, double lambda, const Prepared& prep,
                            std::vector<double>& w, const SolveOptions& opt, double& residual) {
  const Grid& g = op.grid();
  std::vector<double> next(w.size());
  std::size_t it = 0;
  residual = residual_inf(op, lambda, prep, w);
  while (it < opt.max_value_iter && !(residual <= opt.tol)) {
    parallel_for(g.node_count(), op.params().workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t node = begin; node < end; ++node) {
        if (g.is_boundary(node)) {
          next[node] = prep.boundary[node];
          continue;
        }
        double root = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < op.control_count(); ++c) {
          const auto wt = op.weights(node, c);
          double b = prep.cost[node];
          for (std::size_t s = 0; s < wt.size(); ++s) {
            if (wt[s] != 0.0) b += wt[s] * w[static_cast<std::size_t>(op.neighbor(node, s))];
          }
          root = std::min(root, b / (lambda + op.total_rate(node, c)));
        }
        if (prep.obstacle) root = std::max(root, (*prep.obstacle)[node]);
        next[node] = (1.0 - opt.damping) * w[node] + opt.damping * root;
      }
    });
    w.swap(next);
    ++it;
    if (it % 16 == 0 || it == opt.max_value_iter) residual = residual_inf(op, lambda, prep, w);
  }
  residual = residual_inf(op, lambda, prep, w);
  return it;
}

std::uint64_t stop_set_digest(const std::vector<std::uint8_t>& stop) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(stop.data()), stop.size()));
}

}  // namespace

ScalarField complementarity_residual(const ScalarField& w, const ObstacleProblem& problem,
                                     const DiscreteOperator& op) {
  const Prepared prep = prepare(problem, op);
  if (!(w.grid() == op.grid())) throw std::invalid_argument("field grid mismatch");
  const Grid& g = op.grid();
  std::vector<double> wv(w.values().begin(), w.values().end());
  std::vector<double> out(g.node_count(), 0.0);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    if (g.is_boundary(node)) {
      out[node] = std::abs(wv[node] - prep.boundary[node]);
      continue;
    }
    double cont = max_continuation(op, problem.lambda, node, wv, prep.cost[node]);
    if (prep.obstacle) cont = std::min(cont, wv[node] - (*prep.obstacle)[node]);
    out[node] = std::abs(cont);
  }
  return ScalarField(g, std::move(out));
}

ObstacleSolution solve_obstacle(const ObstacleProblem& problem, const DiscreteOperator& op,
                                const SolveOptions& options, const ObstacleSolution* warm_start) {
  const Prepared prep = prepare(problem, op);
  const Grid& g = op.grid();
  const std::size_t nodes = g.node_count();
  const double lambda = problem.lambda;

  std::vector<double> w(nodes, 0.0);
  std::vector<std::uint32_t> control(nodes, 0);
  std::vector<std::uint8_t> stop(nodes, 0);
  if (warm_start && warm_start->value.grid() == g && warm_start->policy.grid() == g) {
    w.assign(warm_start->value.values().begin(), warm_start->value.values().end());
    control.assign(warm_start->policy.indices().begin(), warm_start->policy.indices().end());
    if (prep.obstacle && warm_start->obstacle_active.size() == nodes) stop = warm_start->obstacle_active;
  } else {
    for (std::size_t node = 0; node < nodes; ++node) {
      w[node] = g.is_boundary(node) ? prep.boundary[node] : (prep.obstacle ? (*prep.obstacle)[node] : 0.0);
    }
    const auto init = extract_policy(ScalarField(g, w), op);
    control.assign(init.indices().begin(), init.indices().end());
    if (prep.obstacle) {
      for (std::size_t node = 0; node < nodes; ++node) {
        if (g.is_boundary(node)) continue;
        stop[node] = max_continuation(op, lambda, node, w, prep.cost[node]) > 0.0;
      }
    }
  }
  for (std::size_t node = 0; node < nodes; ++node) {
    if (g.is_boundary(node)) stop[node] = 0;
  }

  SolveReport report;
  report.positivity_violations = op.flagged_nodes().size();
  report.method = "policy-iteration";
  bool pi_ok = false;
  std::set<std::uint64_t> seen;
  for (std::size_t outer = 0; outer < options.max_iter; ++outer) {
    if (!improve_controls(op, lambda, prep, control, stop, w, options.max_iter, report.iterations)) {
      break;
    }
    if (!prep.obstacle) {
      pi_ok = true;
      break;
    }
    // Stop where the obstacle branch is strictly the smaller one; keep the
    // previous choice on ties.
    bool changed = false;
    for (std::size_t node = 0; node < nodes; ++node) {
      if (g.is_boundary(node)) continue;
      const double l = prep.cost[node];
      const double cont = max_continuation(op, lambda, node, w, l);
      const double gap = w[node] - (*prep.obstacle)[node];
      const double eps = kTieEps * (1.0 + local_scale(op, lambda, node, control[node], w, l) +
                                    std::abs((*prep.obstacle)[node]));
      if (!stop[node] && gap < cont - eps) {
        stop[node] = 1;
        changed = true;
      } else if (stop[node] && cont < gap - eps) {
        stop[node] = 0;
        changed = true;
      }
    }
    if (!changed) {
      pi_ok = true;
      break;
    }
    if (!seen.insert(stop_set_digest(stop)).second) break;  // cycling
  }

  report.residual = residual_inf(op, lambda, prep, w);
  if (!pi_ok || !(report.residual <= options.tol)) {
    report.method = pi_ok ? "policy-iteration+value-iteration" : "value-iteration";
    double residual = report.residual;
    report.iterations += value_iteration(op, lambda, prep, w, options, residual);
    report.residual = residual;
  }
  report.converged = report.residual <= options.tol;

  ScalarField value(g, w);
  FeedbackPolicy policy = extract_policy(value, op);
  std::vector<std::uint8_t> active(nodes, 0);
  if (prep.obstacle) {
    for (std::size_t node = 0; node < nodes; ++node) {
      if (g.is_boundary(node)) continue;
      const double cont = max_continuation(op, lambda, node, w, prep.cost[node]);
      active[node] = (w[node] - (*prep.obstacle)[node]) <= cont;
    }
  }
  return {std::move(value), std::move(policy), std::move(active), report};
}

VanishingDiscountResult vanishing_discount(const ScalarField& running_cost,
                                           std::span<const double> lambdas,
                                           std::span<const ScalarField> ladder,
                                           const DiscreteOperator& op, BoundaryRule boundary_rule,
                                           const std::optional<ScalarField>& boundary_values,
                                           const SolveOptions& options) {
  if (lambdas.empty() || ladder.empty()) {
    throw std::invalid_argument("vanishing_discount: empty schedule or ladder");
  }
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw std::invalid_argument("vanishing_discount: lambda must be > 0");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) {
      throw std::invalid_argument("vanishing_discount: lambda schedule must strictly decrease");
    }
  }
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    for (std::size_t node = 0; node < ladder[k].size(); ++node) {
      if (ladder[k][node] < ladder[k - 1][node]) {
        throw std::invalid_argument("vanishing_discount: obstacle ladder must be nondecreasing");
      }
    }
  }

  std::vector<std::vector<ScalarField>> table(ladder.size());
  std::vector<SolveReport> reports;
  std::optional<ObstacleSolution> last;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    std::optional<ObstacleSolution> warm;
    for (double lambda : lambdas) {
      ObstacleProblem p{lambda, ladder[k], running_cost, boundary_rule, boundary_values};
      ObstacleSolution sol = solve_obstacle(p, op, options, warm ? &*warm : nullptr);
      reports.push_back(sol.report);
      table[k].push_back(sol.value);
      warm = std::move(sol);
    }
    last = std::move(warm);
  }

  VanishingDiscountResult out{last->value, last->policy, std::move(table), std::move(reports), 0.0, 0.0, false};
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    for (std::size_t i = 0; i + 1 < lambdas.size(); ++i) {
      for (std::size_t node = 0; node < ladder[k].size(); ++node) {
        out.max_discount_violation = std::max(out.max_discount_violation,
                                              out.table[k][i][node] - out.table[k][i + 1][node]);
      }
    }
  }
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    for (std::size_t k = 0; k + 1 < ladder.size(); ++k) {
      for (std::size_t node = 0; node < ladder[k].size(); ++node) {
        out.max_obstacle_violation = std::max(out.max_obstacle_violation,
                                              out.table[k][i][node] - out.table[k + 1][i][node]);
      }
    }
  }
  out.flagged = out.max_discount_violation > options.tol || out.max_obstacle_violation > options.tol;
  return out;
}

InfiniteHorizonResult solve_infinite_horizon(const ScalarField& running_cost,
                                             const DiscreteOperator& op,
                                             const InfiniteHorizonOptions& options) {
  if (!(options.lambda_start > 0.0) || !(options.lambda_min > 0.0) ||
      !(options.lambda_factor > 0.0 && options.lambda_factor < 1.0) ||
      options.lambda_min > options.lambda_start) {
    throw std::invalid_argument("solve_infinite_horizon: bad lambda schedule");
  }
  const Grid& g = op.grid();
  const ScalarField boundary = options.boundary_values ? *options.boundary_values : ScalarField(g, 0.0);

  InfiniteHorizonResult out{ScalarField(g, 0.0),
                            FeedbackPolicy(g, std::vector<std::uint32_t>(g.node_count(), 0), op.control_count()),
                            0.0, false, false, {}, {}, {}, {}};
  std::optional<ObstacleSolution> prev;
  double lambda = options.lambda_start;
  while (true) {
    ObstacleProblem p{lambda, std::nullopt, running_cost, BoundaryRule::Prescribed, boundary};
    ObstacleSolution sol = solve_obstacle(p, op, options.solve, prev ? &*prev : nullptr);
    out.lambdas.push_back(lambda);
    out.reports.push_back(sol.report);
    double wmax = 0.0;
    for (double v : sol.value.values()) wmax = std::max(wmax, std::abs(v));
    if (wmax > options.divergence_cap) {
      out.diverged = true;
      out.message = "value likely infinite on truncated domain (|W| > " +
                    std::to_string(options.divergence_cap) + " at lambda = " +
                    std::to_string(lambda) + ")";
      break;
    }
    out.value = sol.value;
    out.policy = sol.policy;
    out.lambda_reached = lambda;
    if (prev) {
      double diff = 0.0;
      for (std::size_t node = 0; node < g.node_count(); ++node) {
        diff = std::max(diff, std::abs(sol.value[node] - prev->value[node]));
      }
      out.successive_differences.push_back(diff);
      if (diff <= options.tol * std::max(1.0, wmax)) {
        out.converged = true;
        out.message = "successive lambda difference below tolerance";
        break;
      }
    }
    if (lambda <= options.lambda_min) {
      out.message = "reached lambda_min before successive differences fell below tolerance";
      break;
    }
    prev = std::move(sol);
    lambda = std::max(lambda * options.lambda_factor, options.lambda_min);
  }
  return out;
}

}  // namespace stochlyap
