#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stochlyap {

/// Rectangular lattice over the box [lower, upper] with `cells[i]` cells per
/// axis (so `cells[i] + 1` nodes). Nodes are numbered row-major: the last axis
/// varies fastest.
class Grid {
 public:
  Grid(std::vector<double> lower, std::vector<double> upper,
       std::vector<std::size_t> cells);

  std::size_t dim() const { return lower_.size(); }
  std::size_t node_count() const { return node_count_; }
  std::size_t nodes_along(std::size_t axis) const { return cells_[axis] + 1; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }

  std::span<const double> lower() const { return lower_; }
  std::span<const double> upper() const { return upper_; }
  std::span<const std::size_t> cells() const { return cells_; }

  std::vector<std::size_t> multi_index(std::size_t node) const;
  std::size_t linear_index(std::span<const std::size_t> idx) const;
  /// Component of node `node` along `axis`.
  std::size_t axis_index(std::size_t node, std::size_t axis) const {
    return (node / strides_[axis]) % (cells_[axis] + 1);
  }

  void coordinate(std::size_t node, std::span<double> out) const;
  std::vector<double> coordinate(std::size_t node) const;

  bool is_boundary(std::size_t node) const;
  /// Nearest node to `x`; coordinates outside the box are clamped.
  std::size_t nearest_node(std::span<const double> x) const;
  /// True iff x lies strictly inside the box.
  bool contains_open(std::span<const double> x) const;

  bool operator==(const Grid& other) const = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<std::size_t> cells_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t node_count_ = 0;
};

}  // namespace stochlyap
