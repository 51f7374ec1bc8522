#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stochlyap/estimate.hpp"
#include "stochlyap/field.hpp"
#include "stochlyap/model.hpp"

namespace stochlyap {

/// Euclidean norm; the default distance (to the origin).
double euclidean_norm(std::span<const double> x);

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  std::vector<double> x0;
  /// Paths stop once distance(X) >= stop_radius.
  double stop_radius = std::numeric_limits<double>::infinity();
  /// Paths also stop on leaving the open box.
  std::optional<Box> domain;
  /// Spacing of the report times 0, s, 2s, ..., T (rounded to whole steps);
  /// 0 reports at t = 0 and t = T only.
  double report_interval = 0.0;
  /// Radii r for the time spent with distance(X) >= r before exit.
  std::vector<double> occupation_radii;
  /// Tail windows: running max of distance(X) over [T - w, T].
  std::vector<double> tail_windows;
  /// (t, h) pairs for sup_{t <= s <= t+h} |X(s) - X(t)| of the stopped path.
  std::vector<std::pair<double, double>> modulus_windows;
  /// Keep every n-th state of the first `dump_paths` paths (0 keeps nothing).
  std::size_t dump_paths = 0;
  std::size_t dump_every = 100;
  std::size_t workers = 1;
};

/// What the simulator integrates or samples along each path.
struct Observables {
  std::function<double(std::span<const double>)> distance;  ///< empty: euclidean_norm
  ScalarFn cost;                                            ///< l; empty: 0
  ScalarFn value;                                           ///< V; empty: 0
};

/// Maps a state to a control point.
class ControlLaw {
 public:
  static ControlLaw constant(const ControlSet& controls, std::size_t index);
  /// Nearest-node lookup of the policy; off-grid states are clamped onto the box.
  static ControlLaw feedback(const ControlSet& controls, FeedbackPolicy policy);

  std::span<const double> operator()(std::span<const double> x) const;
  std::string description() const;

 private:
  ControlLaw(const ControlSet& controls, std::optional<FeedbackPolicy> policy, std::size_t index);
  ControlSet controls_;
  std::optional<FeedbackPolicy> policy_;
  std::size_t index_;
};

/// Per-path statistics, stored per field.
struct PathEnsemble {
  SimConfig config;
  std::size_t dim = 1;
  std::size_t steps = 0;
  double dt = 0.0;  ///< effective step, horizon / steps
  std::vector<double> report_times;
  std::vector<std::size_t> report_steps;

  std::vector<std::uint8_t> exited;
  std::vector<std::uint8_t> aborted;   ///< state became non-finite
  std::vector<double> exit_time;       ///< horizon if not exited
  std::vector<double> max_distance;    ///< running max over grid times, from t = 0
  std::vector<double> running_cost;    ///< integral of l up to min(exit, T)
  std::vector<double> terminal;        ///< n_paths x dim, frozen at exit
  /// n_paths x reports: V(X_{tau ^ t_j}) + int_0^{tau ^ t_j} l
  std::vector<double> payoff;
  /// n_paths x reports: int_0^{tau ^ t_j} l
  std::vector<double> cost_at;
  /// n_paths x occupation_radii
  std::vector<double> occupation;
  /// n_paths x tail_windows
  std::vector<double> tail_max;
  /// n_paths x modulus_windows
  std::vector<double> modulus;
  /// dumped states: path, step, state
  struct Sample {
    std::size_t path;
    std::size_t step;
    std::vector<double> x;
  };
  std::vector<Sample> dumped;

  std::size_t n_paths() const { return exited.size(); }
  std::size_t report_count() const { return report_times.size(); }
  std::size_t aborted_count() const;
  /// Index of the report time equal to t (within half a step); throws otherwise.
  std::size_t report_index(double t) const;
};

PathEnsemble simulate_paths(const Dynamics& dyn, const ControlLaw& control, const SimConfig& cfg,
                            const Observables& obs = {});

/// P(sup_{t<=T} distance(X_t) >= k), Wilson interval; aborted paths excluded.
Estimate estimate_exit_probability(const PathEnsemble& ens, double k);

/// Fraction of paths whose distance exceeds rho somewhere in the tail window
/// [T - tail, T]. A finite-horizon stand-in for P(limsup distance > 0).
Estimate estimate_attraction(const PathEnsemble& ens, double rho, double tail);

/// Mean time spent with distance(X) >= r before exit.
Estimate occupation_time(const PathEnsemble& ens, double r);

struct PayoffResult {
  Estimate sup;              ///< estimate at the maximizing report time
  double argmax_time = 0.0;
  std::vector<double> times;
  std::vector<Estimate> series;
};

/// max over report times t of mean[V(X_{tau ^ t}) + int_0^{tau ^ t} l].
PayoffResult payoff_functional(const PathEnsemble& ens);
/// As payoff_functional, minimizing over report times.
PayoffResult inf_payoff_functional(const PathEnsemble& ens);
PayoffResult payoff_functional(const Dynamics& dyn, const ControlLaw& control, const ScalarFn& v,
                               const ScalarFn& l, const SimConfig& cfg);

/// Paired increments of the payoff series between consecutive report times.
std::vector<Estimate> payoff_increments(const PathEnsemble& ens);

/// Paired mean of int_{t_from}^{t_to} l.
Estimate cost_increment(const PathEnsemble& ens, double t_from, double t_to);

struct CoefficientBounds {
  double drift = 0.0;      ///< F: max |f|
  double diffusion = 0.0;  ///< Sigma: max ||sigma||_F
  std::size_t points = 0;
};

/// Scans grid nodes with distance <= radius, over all controls.
CoefficientBounds scan_coefficient_bounds(const Dynamics& dyn, const ControlSet& controls,
                                          const Grid& grid, double radius,
                                          const std::function<double(std::span<const double>)>& distance = {});

struct ModulusCheck {
  Estimate empirical;
  double bound = 0.0;  ///< (2 F^2 h^2 + 8 Sigma^2 h) / r^2
  bool vacuous = false;
  bool passed = false;
};

/// Needs (t, h) among the ensemble's modulus windows.
ModulusCheck check_modulus_bound(const PathEnsemble& ens, double t, double h, double r,
                                 double f_bound, double sigma_bound);

/// One row per path: id, exited, aborted, exit_time, max_distance, running_cost, terminal...
void write_paths_csv(std::ostream& os, const PathEnsemble& ens);

}  // namespace stochlyap
