#pragma once

// Small hand-built dynamics shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "stochlyap/model.hpp"

namespace testing_support {

using stochlyap::Dynamics;

// 1-D: f = drift(x, u), sigma = diffusion(x, u).
inline Dynamics scalar_dynamics(std::function<double(double, double)> drift,
                                std::function<double(double, double)> diffusion) {
  Dynamics d;
  d.name = "test_1d";
  d.drift = [drift](auto x, auto u, auto out) { out[0] = drift(x[0], u[0]); };
  d.diffusion = [diffusion](auto x, auto u, auto out) { out[0] = diffusion(x[0], u[0]); };
  return d;
}

// N-D with N x M constant sigma and drift given as a callable.
inline Dynamics constant_noise(std::size_t n, std::size_t m, std::vector<double> sigma,
                               std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> drift) {
  Dynamics d;
  d.name = "test_nd";
  d.dim_state = n;
  d.dim_noise = m;
  d.drift = std::move(drift);
  d.diffusion = [sigma](auto, auto, auto out) {
    for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = sigma[i];
  };
  return d;
}

inline double square(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace testing_support
