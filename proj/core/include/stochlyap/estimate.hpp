#pragma once

#include <cstddef>
#include <span>

namespace stochlyap {

inline constexpr double kZ95 = 1.959963984540054;

/// Monte Carlo estimate with a 95% interval [lower, upper].
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  double half_width = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
};

/// Wilson score interval for `successes` out of `n` trials.
Estimate wilson_estimate(std::size_t successes, std::size_t n, double z = kZ95);

/// Sample mean with a normal interval (unbiased variance).
Estimate mean_estimate(std::span<const double> samples, double z = kZ95);

}  // namespace stochlyap
