#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stochlyap/hjb.hpp"
#include "stochlyap/parallel.hpp"

namespace stochlyap {

const char* to_string(DriftScheme scheme) {
  switch (scheme) {
    case DriftScheme::Upwind:
      return "upwind";
    case DriftScheme::CentralWhereMonotone:
      return "central-where-monotone";
  }
  return "unknown";
}

DiscreteOperator::DiscreteOperator(const Dynamics& dyn, Grid grid, const ControlSet& controls,
                                   HamiltonianParams params)
    : grid_(std::move(grid)), params_(params), controls_(controls.size()) {
  const std::size_t n = grid_.dim();
  const DiffusionMatrixCache cache(dyn, grid_, controls);

  // Axis neighbours first (+e_i at 2i, -e_i at 2i+1), then per pair i<j the
  // four diagonals (+i,+j), (-i,-j), (+i,-j), (-i,+j).
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::ptrdiff_t>(grid_.stride(i));
    offsets_.push_back(s);
    offsets_.push_back(-s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto si = static_cast<std::ptrdiff_t>(grid_.stride(i));
      const auto sj = static_cast<std::ptrdiff_t>(grid_.stride(j));
      offsets_.push_back(si + sj);
      offsets_.push_back(-si - sj);
      offsets_.push_back(si - sj);
      offsets_.push_back(-si + sj);
    }
  }

  const std::size_t stencil = offsets_.size();
  const std::size_t nodes = grid_.node_count();
  weights_.assign(nodes * controls_ * stencil, 0.0);
  total_rate_.assign(nodes * controls_, 0.0);
  flagged_.assign(nodes, 0);

  parallel_for(nodes, params_.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i) h[i] = grid_.spacing(i);
    for (std::size_t node = begin; node < end; ++node) {
      if (grid_.is_boundary(node)) continue;
      for (std::size_t c = 0; c < controls_; ++c) {
        const auto f = cache.drift(node, c);
        const auto a = cache.a(node, c);
        double* w = weights_.data() + (node * controls_ + c) * stencil;

        std::size_t pair = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j, ++pair) {
            const double aij = a[i * n + j];
            const double cross = std::abs(aij) / (h[i] * h[j]);
            double* wp = w + 2 * n + 4 * pair;
            if (aij > 0.0) {
              wp[0] = cross;
              wp[1] = cross;
            } else if (aij < 0.0) {
              wp[2] = cross;
              wp[3] = cross;
            }
          }
        }

        for (std::size_t i = 0; i < n; ++i) {
          double d = a[i * n + i] / (h[i] * h[i]);
          for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d -= std::abs(a[i * n + j]) / (h[i] * h[j]);
          }
          double up, down;
          const double half = std::abs(f[i]) / (2.0 * h[i]);
          // The central test often sits at equality (x = +-h for multiplicative
          // noise) and node coordinates carry roundoff relative to h, so allow a
          // little slack; the weight clamped to zero is then at most 1e-9 * half.
          const double slack = 1e-9 * (std::abs(d) + half);
          const bool central =
              params_.drift_scheme == DriftScheme::CentralWhereMonotone && d - half >= -slack;
          if (central) {
            up = std::max(0.0, d + f[i] / (2.0 * h[i]));
            down = std::max(0.0, d - f[i] / (2.0 * h[i]));
          } else {
            up = d + std::max(f[i], 0.0) / h[i];
            down = d + std::max(-f[i], 0.0) / h[i];
          }
          if (up < 0.0 || down < 0.0) {
            flagged_[node] = 1;
            up = std::max(up, 0.0);
            down = std::max(down, 0.0);
          }
          w[2 * i] = up;
          w[2 * i + 1] = down;
        }

        double total = 0.0;
        for (std::size_t s = 0; s < stencil; ++s) total += w[s];
        total_rate_[node * controls_ + c] = total;
      }
    }
  });

  for (std::size_t node = 0; node < nodes; ++node) {
    if (flagged_[node]) flagged_list_.push_back(node);
  }
}

double DiscreteOperator::apply(std::size_t node, std::size_t control,
                               std::span<const double> w) const {
  if (grid_.is_boundary(node)) return 0.0;
  const auto wt = weights(node, control);
  const double centre = w[node];
  double acc = 0.0;
  for (std::size_t s = 0; s < wt.size(); ++s) {
    if (wt[s] != 0.0) acc += wt[s] * (centre - w[static_cast<std::size_t>(neighbor(node, s))]);
  }
  return acc;
}

namespace {

void require_same_grid(const ScalarField& w, const DiscreteOperator& op) {
  if (!(w.grid() == op.grid())) {
    throw std::invalid_argument("field grid does not match the operator grid");
  }
}

}  // namespace

HamiltonianResult discrete_hamiltonian(const ScalarField& w, const DiscreteOperator& op) {
  require_same_grid(w, op);
  const std::size_t nodes = op.grid().node_count();
  std::vector<double> value(nodes, 0.0);
  std::vector<std::uint32_t> arg(nodes, 0);
  parallel_for(nodes, op.params().workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t node = begin; node < end; ++node) {
      if (op.grid().is_boundary(node)) continue;
      double best = op.apply(node, 0, w.values());
      std::uint32_t best_c = 0;
      for (std::size_t c = 1; c < op.control_count(); ++c) {
        const double v = op.apply(node, c, w.values());
        if (v > best) {
          best = v;
          best_c = static_cast<std::uint32_t>(c);
        }
      }
      value[node] = best;
      arg[node] = best_c;
    }
  });
  return {ScalarField(op.grid(), std::move(value)),
          FeedbackPolicy(op.grid(), std::move(arg), op.control_count()), op.flagged_nodes()};
}

ScalarField hamiltonian_under_policy(const ScalarField& w, const FeedbackPolicy& policy,
                                     const DiscreteOperator& op) {
  require_same_grid(w, op);
  if (!(policy.grid() == op.grid()) || policy.control_count() != op.control_count()) {
    throw std::invalid_argument("policy does not match the operator");
  }
  std::vector<double> value(op.grid().node_count(), 0.0);
  parallel_for(value.size(), op.params().workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t node = begin; node < end; ++node) {
      value[node] = op.apply(node, policy[node], w.values());
    }
  });
  return ScalarField(op.grid(), std::move(value));
}

FeedbackPolicy extract_policy(const ScalarField& w, const DiscreteOperator& op) {
  return discrete_hamiltonian(w, op).argmax;
}

SupersolutionReport verify_supersolution(const ScalarField& v, const ScalarField& running_cost,
                                         const DiscreteOperator& op, double tol) {
  require_same_grid(running_cost, op);
  const auto ham = discrete_hamiltonian(v, op);
  const std::size_t nodes = op.grid().node_count();
  std::vector<double> residual(nodes, 0.0);
  SupersolutionReport report{ScalarField(op.grid(), 0.0), std::vector<std::uint8_t>(nodes, 1), {},
                             0.0, tol, true};
  bool any = false;
  for (std::size_t node = 0; node < nodes; ++node) {
    if (op.grid().is_boundary(node)) continue;
    residual[node] = ham.value[node] - running_cost[node];
    if (!any || residual[node] < report.min_residual) report.min_residual = residual[node];
    any = true;
    if (residual[node] < -tol) {
      report.passed[node] = 0;
      report.failing_nodes.push_back(node);
    }
  }
  report.residual = ScalarField(op.grid(), std::move(residual));
  report.all_passed = report.failing_nodes.empty();
  return report;
}

}  // namespace stochlyap
