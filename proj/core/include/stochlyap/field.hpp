#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stochlyap/grid.hpp"

namespace stochlyap {

/// Real function of the state, e.g. a Lyapunov candidate or a running cost.
using ScalarFn = std::function<double(std::span<const double>)>;

/// Grid-indexed real values (V, l, residuals, value functions).
class ScalarField {
 public:
  ScalarField(Grid grid, std::vector<double> values);
  ScalarField(Grid grid, double fill);

  static ScalarField sample(const Grid& grid, const ScalarFn& fn);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t node) const { return values_[node]; }
  /// Throws if `value` is not finite.
  void set(std::size_t node, double value);

  /// Multilinear interpolation; points outside the box are clamped onto it.
  double interpolate(std::span<const double> x) const;

  double max() const;
  double min() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Grid-indexed control choices (indices into a ControlSet).
class FeedbackPolicy {
 public:
  FeedbackPolicy(Grid grid, std::vector<std::uint32_t> indices, std::size_t control_count);

  const Grid& grid() const { return grid_; }
  std::size_t control_count() const { return control_count_; }
  std::span<const std::uint32_t> indices() const { return indices_; }
  std::uint32_t operator[](std::size_t node) const { return indices_[node]; }
  /// Control index at the grid node nearest to `x`.
  std::uint32_t lookup(std::span<const double> x) const {
    return indices_[grid_.nearest_node(x)];
  }

  bool operator==(const FeedbackPolicy&) const = default;

 private:
  Grid grid_;
  std::vector<std::uint32_t> indices_;
  std::size_t control_count_;
};

}  // namespace stochlyap
