#include "stochlyap/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stochlyap {

Estimate wilson_estimate(std::size_t successes, std::size_t n, double z) {
  if (n == 0) throw std::invalid_argument("wilson_estimate: no trials");
  if (successes > n) throw std::invalid_argument("wilson_estimate: successes > trials");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double spread = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Estimate e;
  e.value = p;
  e.std_error = std::sqrt(p * (1.0 - p) / nn);
  e.lower = std::max(0.0, centre - spread);
  e.upper = std::min(1.0, centre + spread);
  // The closed form only cancels up to rounding at the ends.
  if (successes == 0) e.lower = 0.0;
  if (successes == n) e.upper = 1.0;
  // Half-width measured from the point estimate to the far end of the interval,
  // so value + half_width always covers the Wilson upper limit.
  e.half_width = std::max(e.upper - p, p - e.lower);
  e.n = n;
  return e;
}

Estimate mean_estimate(std::span<const double> samples, double z) {
  if (samples.empty()) throw std::invalid_argument("mean_estimate: no samples");
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double var = samples.size() > 1 ? ss / (n - 1.0) : 0.0;
  Estimate e;
  e.value = mean;
  e.std_error = std::sqrt(var / n);
  e.half_width = z * e.std_error;
  e.lower = mean - e.half_width;
  e.upper = mean + e.half_width;
  e.n = samples.size();
  return e;
}

}  // namespace stochlyap
