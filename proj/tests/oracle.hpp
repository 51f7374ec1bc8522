#pragma once

// Reference values computed without the library's operator or solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "stochlyap/model.hpp"

namespace oracle {

// Benchmark dX = -X dt + s X dB: E[X_t^2] = x^2 exp((s^2 - 2) t), so
// int_0^inf E[X_t^2] dt = x^2 / (2 - s^2).
inline double second_moment(double x0, double s2, double t) { return x0 * x0 * std::exp((s2 - 2.0) * t); }
inline double cost_to_go(double x0, double s2) { return x0 * x0 / (2.0 - s2); }

// Discrete obstacle problem on a uniform 1-D grid with the upwind Markov
// chain, solved by Gauss-Seidel sweeps of
//   W_i = max(psi_i, min_u (l_i + up W_{i+1} + down W_{i-1}) / (lambda + up + down))
// with W fixed to `boundary` at both ends. Slow but simple.
inline std::vector<double> obstacle_1d(const stochlyap::Dynamics& dyn, double lo, double hi, std::size_t cells,
                                       const std::vector<double>& controls, double lambda,
                                       const std::vector<double>& l, const std::optional<std::vector<double>>& psi,
                                       const std::vector<double>& boundary, double tol = 1e-13,
                                       std::size_t max_sweeps = 5000000) {
  const std::size_t n = cells + 1;
  const double h = (hi - lo) / static_cast<double>(cells);
  std::vector<double> up(n * controls.size()), down(n * controls.size());
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double x = lo + h * static_cast<double>(i);
    for (std::size_t c = 0; c < controls.size(); ++c) {
      double f = 0.0, s = 0.0;
      const double u = controls[c];
      dyn.drift(std::span<const double>(&x, 1), std::span<const double>(&u, 1), std::span<double>(&f, 1));
      dyn.diffusion(std::span<const double>(&x, 1), std::span<const double>(&u, 1), std::span<double>(&s, 1));
      const double a = 0.5 * s * s;
      up[i * controls.size() + c] = a / (h * h) + std::max(f, 0.0) / h;
      down[i * controls.size() + c] = a / (h * h) + std::max(-f, 0.0) / h;
    }
  }
  std::vector<double> w(n, 0.0);
  w.front() = boundary.front();
  w.back() = boundary.back();
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < controls.size(); ++c) {
        const double p = up[i * controls.size() + c], q = down[i * controls.size() + c];
        best = std::min(best, (l[i] + p * w[i + 1] + q * w[i - 1]) / (lambda + p + q));
      }
      if (psi) best = std::max(best, (*psi)[i]);
      change = std::max(change, std::abs(best - w[i]));
      w[i] = best;
    }
    if (change < tol) break;
  }
  return w;
}

}  // namespace oracle
