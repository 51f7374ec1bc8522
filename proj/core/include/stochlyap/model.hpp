#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochlyap/grid.hpp"

namespace stochlyap {

/// Writes a coefficient evaluated at (state, control) into `out`.
using CoefficientFn =
    std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> out)>;

/// Controlled diffusion dX = f(X, u) dt + sigma(X, u) dB.
///
/// `drift` writes N values; `diffusion` writes the N x M matrix sigma in
/// row-major order.
struct Dynamics {
  std::size_t dim_state = 1;
  std::size_t dim_noise = 1;
  std::size_t dim_control = 1;
  CoefficientFn drift;
  CoefficientFn diffusion;
  std::optional<double> lipschitz_hint;
  std::string name;
};

/// Finite sample of the compact control set A.
class ControlSet {
 public:
  ControlSet(std::size_t dim, std::vector<double> flat_points, std::string description = {});
  static ControlSet scalars(std::vector<double> values, std::string description = {});

  std::size_t size() const { return points_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(points_).subspan(i * dim_, dim_);
  }
  const std::string& description() const { return description_; }

 private:
  std::size_t dim_;
  std::vector<double> points_;
  std::string description_;
};

/// A user callable produced NaN or inf.
class NonFiniteCoefficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> evaluate_drift(const Dynamics& dyn, std::span<const double> x,
                                   std::span<const double> u);
std::vector<double> evaluate_diffusion(const Dynamics& dyn, std::span<const double> x,
                                       std::span<const double> u);

/// a(x, u) = sigma sigma^T / 2, N x N row-major. Exactly symmetric.
std::vector<double> diffusion_matrix(const Dynamics& dyn, std::span<const double> x,
                                     std::span<const double> u);

/// Per (node, control) drift and diffusion matrix over a grid.
class DiffusionMatrixCache {
 public:
  DiffusionMatrixCache(const Dynamics& dyn, const Grid& grid, const ControlSet& controls);

  std::size_t dim() const { return dim_; }
  std::size_t node_count() const { return nodes_; }
  std::size_t control_count() const { return controls_; }

  std::span<const double> drift(std::size_t node, std::size_t control) const {
    return std::span<const double>(drift_).subspan((node * controls_ + control) * dim_, dim_);
  }
  std::span<const double> a(std::size_t node, std::size_t control) const {
    return std::span<const double>(a_).subspan((node * controls_ + control) * dim_ * dim_,
                                               dim_ * dim_);
  }

  /// Smallest eigenvalue over all cached matrices.
  double min_eigenvalue() const;

 private:
  std::size_t dim_;
  std::size_t nodes_;
  std::size_t controls_;
  std::vector<double> drift_;
  std::vector<double> a_;
};

struct LipschitzReport {
  double max_ratio = 0.0;
  std::size_t pairs = 0;
  std::vector<double> worst_x;
  std::vector<double> worst_y;
  std::size_t worst_control = 0;
};

/// Max over random (x, y, u) of (|f(x,u)-f(y,u)| + ||sigma(x,u)-sigma(y,u)||_F) / |x-y|.
/// A diagnostic; nothing is enforced.
LipschitzReport validate_lipschitz(const Dynamics& dyn, const Grid& grid,
                                   const ControlSet& controls, std::size_t n_pairs,
                                   std::uint64_t seed = 0);

/// Distance from theta*(a,f)(u_i) + (1-theta)*(a,f)(u_j) to the nearest sampled (a,f)(u).
double convexity_defect(const Dynamics& dyn, std::span<const double> x,
                        const ControlSet& controls, std::size_t i, std::size_t j, double theta);

/// Worst convexity_defect over random control pairs and theta in (0,1). Zero for a
/// single control point.
double validate_convexity(const Dynamics& dyn, std::span<const double> x,
                          const ControlSet& controls, std::size_t n_trials,
                          std::uint64_t seed = 0);

}  // namespace stochlyap
