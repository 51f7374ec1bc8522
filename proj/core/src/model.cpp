#include "stochlyap/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace stochlyap {

namespace {

std::string describe_point(std::span<const double> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

void require_finite(std::span<const double> values, const char* what, std::span<const double> x,
                    std::span<const double> u) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteCoefficient(std::string("non-finite ") + what + " at x=" + describe_point(x) +
                                 ", u=" + describe_point(u));
    }
  }
}

}  // namespace

ControlSet::ControlSet(std::size_t dim, std::vector<double> flat_points, std::string description)
    : dim_(dim), points_(std::move(flat_points)), description_(std::move(description)) {
  if (dim_ == 0) throw std::invalid_argument("control set: dimension must be positive");
  if (points_.empty() || points_.size() % dim_ != 0) {
    throw std::invalid_argument("control set: need a nonempty list of points of dimension " +
                                std::to_string(dim_));
  }
  for (double v : points_) {
    if (!std::isfinite(v)) throw std::invalid_argument("control set: non-finite control point");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      if (std::equal(point(i).begin(), point(i).end(), point(j).begin())) {
        throw std::invalid_argument("control set: duplicate points " + std::to_string(i) +
                                    " and " + std::to_string(j));
      }
    }
  }
}

ControlSet ControlSet::scalars(std::vector<double> values, std::string description) {
  return ControlSet(1, std::move(values), std::move(description));
}

std::vector<double> evaluate_drift(const Dynamics& dyn, std::span<const double> x,
                                   std::span<const double> u) {
  std::vector<double> out(dyn.dim_state, 0.0);
  dyn.drift(x, u, out);
  require_finite(out, "drift", x, u);
  return out;
}

std::vector<double> evaluate_diffusion(const Dynamics& dyn, std::span<const double> x,
                                       std::span<const double> u) {
  std::vector<double> out(dyn.dim_state * dyn.dim_noise, 0.0);
  dyn.diffusion(x, u, out);
  require_finite(out, "diffusion", x, u);
  return out;
}

std::vector<double> diffusion_matrix(const Dynamics& dyn, std::span<const double> x,
                                     std::span<const double> u) {
  const std::size_t n = dyn.dim_state;
  const std::size_t m = dyn.dim_noise;
  const std::vector<double> sigma = evaluate_diffusion(dyn, x, u);
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += sigma[i * m + k] * sigma[j * m + k];
      a[i * n + j] = 0.5 * s;
      a[j * n + i] = 0.5 * s;
    }
  }
  return a;
}

DiffusionMatrixCache::DiffusionMatrixCache(const Dynamics& dyn, const Grid& grid,
                                           const ControlSet& controls)
    : dim_(dyn.dim_state), nodes_(grid.node_count()), controls_(controls.size()) {
  if (grid.dim() != dyn.dim_state) {
    throw std::invalid_argument("grid dimension does not match the state dimension");
  }
  if (controls.dim() != dyn.dim_control) {
    throw std::invalid_argument("control dimension does not match the dynamics");
  }
  drift_.resize(nodes_ * controls_ * dim_);
  a_.resize(nodes_ * controls_ * dim_ * dim_);
  std::vector<double> x(dim_);
  for (std::size_t node = 0; node < nodes_; ++node) {
    grid.coordinate(node, x);
    for (std::size_t c = 0; c < controls_; ++c) {
      std::vector<double> f, a;
      try {
        f = evaluate_drift(dyn, x, controls.point(c));
        a = diffusion_matrix(dyn, x, controls.point(c));
      } catch (const NonFiniteCoefficient& e) {
        throw NonFiniteCoefficient(std::string(e.what()) + " (node " + std::to_string(node) +
                                   ", control " + std::to_string(c) + ")");
      }
      std::copy(f.begin(), f.end(), drift_.begin() + static_cast<std::ptrdiff_t>((node * controls_ + c) * dim_));
      std::copy(a.begin(), a.end(),
                a_.begin() + static_cast<std::ptrdiff_t>((node * controls_ + c) * dim_ * dim_));
    }
  }
}

double DiffusionMatrixCache::min_eigenvalue() const {
  double lo = std::numeric_limits<double>::infinity();
  const auto n = static_cast<Eigen::Index>(dim_);
  for (std::size_t k = 0; k < nodes_ * controls_; ++k) {
    Eigen::Map<const Eigen::MatrixXd> m(a_.data() + k * dim_ * dim_, n, n);
    if (dim_ == 1) {
      lo = std::min(lo, m(0, 0));
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

LipschitzReport validate_lipschitz(const Dynamics& dyn, const Grid& grid,
                                   const ControlSet& controls, std::size_t n_pairs,
                                   std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("validate_lipschitz: n_pairs must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, controls.size() - 1);
  const std::size_t n = dyn.dim_state;
  LipschitzReport report;
  std::vector<double> x(n), y(n);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_real_distribution<double> axis(grid.lower()[i], grid.upper()[i]);
      x[i] = axis(rng);
      y[i] = axis(rng);
    }
    const std::size_t c = pick(rng);
    double dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
    dist = std::sqrt(dist);
    ++report.pairs;
    if (dist == 0.0) continue;
    const auto u = controls.point(c);
    const auto fx = evaluate_drift(dyn, x, u), fy = evaluate_drift(dyn, y, u);
    const auto sx = evaluate_diffusion(dyn, x, u), sy = evaluate_diffusion(dyn, y, u);
    double df = 0.0, ds = 0.0;
    for (std::size_t i = 0; i < fx.size(); ++i) df += (fx[i] - fy[i]) * (fx[i] - fy[i]);
    for (std::size_t i = 0; i < sx.size(); ++i) ds += (sx[i] - sy[i]) * (sx[i] - sy[i]);
    const double ratio = (std::sqrt(df) + std::sqrt(ds)) / dist;
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.worst_x = x;
      report.worst_y = y;
      report.worst_control = c;
    }
  }
  return report;
}

namespace {

// Stacks (a, f) into one vector; the convexity condition lives in this space.
std::vector<double> coefficient_pair(const Dynamics& dyn, std::span<const double> x,
                                     std::span<const double> u) {
  std::vector<double> v = diffusion_matrix(dyn, x, u);
  const auto f = evaluate_drift(dyn, x, u);
  v.insert(v.end(), f.begin(), f.end());
  return v;
}

double distance_to_samples(const std::vector<double>& target,
                           const std::vector<std::vector<double>>& samples) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) d += (s[i] - target[i]) * (s[i] - target[i]);
    best = std::min(best, d);
  }
  return std::sqrt(best);
}

std::vector<std::vector<double>> sample_pairs(const Dynamics& dyn, std::span<const double> x,
                                              const ControlSet& controls) {
  std::vector<std::vector<double>> samples;
  samples.reserve(controls.size());
  for (std::size_t c = 0; c < controls.size(); ++c) {
    samples.push_back(coefficient_pair(dyn, x, controls.point(c)));
  }
  return samples;
}

double defect_from_samples(const std::vector<std::vector<double>>& samples, std::size_t i,
                           std::size_t j, double theta) {
  std::vector<double> mix(samples[i].size());
  for (std::size_t k = 0; k < mix.size(); ++k) {
    mix[k] = theta * samples[i][k] + (1.0 - theta) * samples[j][k];
  }
  return distance_to_samples(mix, samples);
}

}  // namespace

double convexity_defect(const Dynamics& dyn, std::span<const double> x,
                        const ControlSet& controls, std::size_t i, std::size_t j, double theta) {
  if (i >= controls.size() || j >= controls.size()) {
    throw std::out_of_range("convexity_defect: control index out of range");
  }
  return defect_from_samples(sample_pairs(dyn, x, controls), i, j, theta);
}

double validate_convexity(const Dynamics& dyn, std::span<const double> x,
                          const ControlSet& controls, std::size_t n_trials, std::uint64_t seed) {
  if (controls.size() < 2) return 0.0;
  const auto samples = sample_pairs(dyn, x, controls);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, controls.size() - 1);
  std::uniform_real_distribution<double> theta(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < n_trials; ++t) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    if (i == j) continue;
    worst = std::max(worst, defect_from_samples(samples, i, j, theta(rng)));
  }
  return worst;
}

}  // namespace stochlyap
