#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stochlyap/field.hpp"
#include "stochlyap/hjb.hpp"
#include "stochlyap/model.hpp"
#include "stochlyap/sde.hpp"

namespace stochlyap {

enum class Verdict { Pass, Fail, Indeterminate, Vacuous };
const char* to_string(Verdict v);

struct Evidence {
  std::string quantity;
  double value = 0.0;
  double tolerance = 0.0;
  std::string provenance;  ///< where the number came from: grid, monte-carlo, arithmetic, solver
};

struct CheckReport {
  std::string check_name;
  Verdict verdict = Verdict::Indeterminate;
  std::vector<Evidence> evidence;
  std::vector<std::string> notes;
  std::string config_digest;
  std::uint64_t seed = 0;

  void add(std::string quantity, double value, double tolerance, std::string provenance) {
    evidence.push_back({std::move(quantity), value, tolerance, std::move(provenance)});
  }
  /// First evidence entry with this name; throws if missing.
  const Evidence& find(const std::string& quantity) const;
};

using DistanceFn = std::function<double(std::span<const double>)>;

enum class Flavor { Local, LocalStrict, GlobalStrict, MVariant };

struct LyapunovCandidate {
  ScalarFn value;
  ScalarFn cost;  ///< empty means l = 0
  Flavor flavor = Flavor::Local;
  std::string description;
};

/// The target M, through its distance function.
struct TargetSet {
  DistanceFn distance;
  double membership_tol = 1e-12;
  std::string description;
};

TargetSet origin_target();

/// Everything a check needs besides the candidate. `sim` supplies dt, T,
/// n_paths, seed, workers and report spacing; each check overrides x0 and the
/// stopping data.
struct CheckSetup {
  Dynamics dyn;
  ControlSet controls;
  Grid grid;
  HamiltonianParams hamiltonian;
  SimConfig sim;
  double supersolution_tol = 1e-8;
  std::string config_digest;
};

/// min V over grid nodes with distance >= k (nullopt if there are none).
std::optional<double> shell_min(const ScalarField& v, const DistanceFn& distance, double k);
/// max V over grid nodes with distance <= r (nullopt if there are none).
std::optional<double> ball_max(const ScalarField& v, const DistanceFn& distance, double r);

/// Exit-probability bound V(x0) / min_{d >= k} V against simulation under the
/// HJB-extracted policy, for each x0.
CheckReport lyapunov_stability_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                     double k, const std::vector<std::vector<double>>& x0s);

/// Ratio max_{|x|<=R} V / min_{|y|>=S} V along `s_list`, plus one simulated
/// spot check at (R, s_list.back()).
CheckReport lagrange_stability_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                     double r, const std::vector<double>& s_list);

/// Tail-window attraction estimate against the same bound, and the running
/// cost increment over [T/2, T].
CheckReport asymptotic_stability_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                       double k, const std::vector<std::vector<double>>& x0s,
                                       double rho, double tail);

/// Consecutive report-time increments of E[V(X_tau(t)) + int l] never exceed
/// `n_se` standard errors.
CheckReport supermartingale_check(const CheckSetup& setup, const LyapunovCandidate& cand, double k,
                                  const std::vector<double>& x0, double n_se = 3.0);

struct RepresentationOptions {
  double rel_tol = 0.03;   ///< allowed payoff - V(x0), relative to V(x0)
  double abs_tol = 1e-12;
  /// Constant control indices used as comparison policies; empty means all.
  std::vector<std::size_t> constant_policies;
};

/// V(x0) <= payoff under each constant policy + CI, and payoff under the HJB
/// policy <= V(x0) (1 + rel_tol) + CI. Paths stop on the grid box.
CheckReport representation_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                 const std::vector<std::vector<double>>& x0s,
                                 const RepresentationOptions& options = {});

struct MinimalityOptions {
  double grid_tol = 1e-6;
  /// Relative band |V - V_inf| / V on interior nodes with |x| in [lo, hi]
  /// reported as the equality measure.
  double band_lo = 0.1;
  double band_hi = 1.5;
  InfiniteHorizonOptions solve;
};

/// V >= V_inf - grid_tol nodewise, with V_inf solved using V's own values
/// on the box boundary.
CheckReport minimality_check(const CheckSetup& setup, const ScalarField& v, const ScalarField& l,
                             const MinimalityOptions& options = {});

/// inf over report times of E[U(X) + int l] >= U(x0) - CI - abs_tol under each
/// constant policy and the HJB policy of U.
CheckReport subsolution_value_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                    const std::vector<std::vector<double>>& x0s,
                                    double rel_tol = 0.03, double abs_tol = 1e-12);

/// Stability, supermartingale and (for strict candidates) attraction numbers
/// with |x| replaced by d(x, M). With M = {0} the evidence matches
/// lyapunov_stability_check and supermartingale_check exactly.
CheckReport attractor_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                            const TargetSet& target, double k,
                            const std::vector<std::vector<double>>& x0s, double n_se = 3.0);

/// P(sup_{t<=s<=t+h} |X(s) - X(t)| >= r) against (2 F^2 h^2 + 8 Sigma^2 h) / r^2,
/// with F, Sigma scanned over the k-ball and all controls. Vacuous when the
/// bound is >= 1.
CheckReport modulus_bound_check(const CheckSetup& setup, const LyapunovCandidate& cand, double k,
                                const std::vector<std::vector<double>>& x0s, double t, double h,
                                double r);

/// Expected time spent with |X| >= r before leaving B_k, against
/// V(x0) / min_{|y|>=r} l.
CheckReport occupation_time_check(const CheckSetup& setup, const LyapunovCandidate& cand, double k,
                                  const std::vector<std::vector<double>>& x0s, double r);

struct IntensityEntry {
  double delta = 0.0;
  double c_delta = 0.0;
};

CheckReport small_intensity_check(const ScalarFn& big_l, const std::vector<IntensityEntry>& table,
                                  const Dynamics& dyn, const ControlSet& controls, const Grid& grid,
                                  double rel_tol = 1e-12);

/// l(x) = max(0, L(x) - C * max_u tr a(x, u)) for one (delta, C) pair; zero for |x| <= delta.
ScalarField small_intensity_cost(const ScalarFn& big_l, const IntensityEntry& entry,
                                 const Dynamics& dyn, const ControlSet& controls, const Grid& grid);

/// Radial test for V = |x|^gamma at every node x != 0:
///   max_u { -f.x - tr a - (gamma - 2) x^T a x / |x|^2 } >= 0.
CheckReport radial_condition_check(double gamma, const Dynamics& dyn, const ControlSet& controls,
                                   const Grid& grid, double rel_tol = 1e-12);

}  // namespace stochlyap
