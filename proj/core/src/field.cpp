#include "stochlyap/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochlyap {

ScalarField::ScalarField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.node_count()) {
    throw std::invalid_argument("field: expected " + std::to_string(grid_.node_count()) +
                                " values, got " + std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument("field: non-finite value at node " + std::to_string(i));
    }
  }
}

ScalarField::ScalarField(Grid grid, double fill)
    : ScalarField(grid, std::vector<double>(grid.node_count(), fill)) {}

ScalarField ScalarField::sample(const Grid& grid, const ScalarFn& fn) {
  std::vector<double> values(grid.node_count());
  std::vector<double> x(grid.dim());
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.coordinate(n, x);
    values[n] = fn(x);
  }
  return ScalarField(grid, std::move(values));
}

void ScalarField::set(std::size_t node, double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("field: non-finite value at node " + std::to_string(node));
  }
  values_.at(node) = value;
}

double ScalarField::interpolate(std::span<const double> x) const {
  const std::size_t d = grid_.dim();
  std::vector<std::size_t> base(d);
  std::vector<double> frac(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double cells = static_cast<double>(grid_.cells()[i]);
    double s = (x[i] - grid_.lower()[i]) / grid_.spacing(i);
    if (std::isnan(s)) s = 0.0;
    s = std::clamp(s, 0.0, cells);
    double fl = std::floor(s);
    if (fl >= cells) fl = cells - 1.0;
    base[i] = static_cast<std::size_t>(fl);
    frac[i] = s - fl;
  }
  double acc = 0.0;
  const std::size_t corners = std::size_t{1} << d;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t node = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const bool up = (c >> i) & 1U;
      w *= up ? frac[i] : 1.0 - frac[i];
      node += (base[i] + (up ? 1 : 0)) * grid_.stride(i);
    }
    if (w != 0.0) acc += w * values_[node];
  }
  return acc;
}

double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }

FeedbackPolicy::FeedbackPolicy(Grid grid, std::vector<std::uint32_t> indices,
                               std::size_t control_count)
    : grid_(std::move(grid)), indices_(std::move(indices)), control_count_(control_count) {
  if (indices_.size() != grid_.node_count()) {
    throw std::invalid_argument("policy: size does not match grid");
  }
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] >= control_count_) {
      throw std::invalid_argument("policy: control index out of range at node " +
                                  std::to_string(i));
    }
  }
}

}  // namespace stochlyap
