#include "stochlyap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochlyap {

Grid::Grid(std::vector<double> lower, std::vector<double> upper,
           std::vector<std::size_t> cells)
    : lower_(std::move(lower)), upper_(std::move(upper)), cells_(std::move(cells)) {
  if (lower_.empty()) throw std::invalid_argument("grid: dimension must be positive");
  if (lower_.size() != upper_.size() || lower_.size() != cells_.size()) {
    throw std::invalid_argument("grid: lower/upper/cells must have the same length");
  }
  const std::size_t n = lower_.size();
  spacing_.resize(n);
  strides_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i])) {
      throw std::invalid_argument("grid: require finite lower < upper on axis " +
                                  std::to_string(i));
    }
    if (cells_[i] < 2) {
      throw std::invalid_argument("grid: need at least 2 cells on axis " + std::to_string(i));
    }
    spacing_[i] = (upper_[i] - lower_[i]) / static_cast<double>(cells_[i]);
  }
  std::size_t stride = 1;
  for (std::size_t i = n; i-- > 0;) {
    strides_[i] = stride;
    stride *= cells_[i] + 1;
  }
  node_count_ = stride;
}

std::vector<std::size_t> Grid::multi_index(std::size_t node) const {
  std::vector<std::size_t> idx(dim());
  for (std::size_t i = 0; i < dim(); ++i) idx[i] = axis_index(node, i);
  return idx;
}

std::size_t Grid::linear_index(std::span<const std::size_t> idx) const {
  std::size_t node = 0;
  for (std::size_t i = 0; i < dim(); ++i) node += idx[i] * strides_[i];
  return node;
}

void Grid::coordinate(std::size_t node, std::span<double> out) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    const std::size_t k = axis_index(node, i);
    // Pin the last node to `upper` exactly so boundary coordinates are exact.
    out[i] = (k == cells_[i]) ? upper_[i] : lower_[i] + static_cast<double>(k) * spacing_[i];
  }
}

std::vector<double> Grid::coordinate(std::size_t node) const {
  std::vector<double> x(dim());
  coordinate(node, x);
  return x;
}

bool Grid::is_boundary(std::size_t node) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    const std::size_t k = axis_index(node, i);
    if (k == 0 || k == cells_[i]) return true;
  }
  return false;
}

std::size_t Grid::nearest_node(std::span<const double> x) const {
  std::size_t node = 0;
  for (std::size_t i = 0; i < dim(); ++i) {
    double r = std::round((x[i] - lower_[i]) / spacing_[i]);
    if (std::isnan(r)) r = 0.0;
    const double clamped = std::clamp(r, 0.0, static_cast<double>(cells_[i]));
    node += static_cast<std::size_t>(clamped) * strides_[i];
  }
  return node;
}

bool Grid::contains_open(std::span<const double> x) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(x[i] > lower_[i] && x[i] < upper_[i])) return false;
  }
  return true;
}

}  // namespace stochlyap
