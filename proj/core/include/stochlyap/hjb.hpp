#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stochlyap/field.hpp"
#include "stochlyap/grid.hpp"
#include "stochlyap/model.hpp"

namespace stochlyap {

enum class DriftScheme {
  /// One-sided differences in the direction of the drift.
  Upwind,
  /// Central differences wherever the diffusion keeps both weights nonnegative,
  /// upwind elsewhere.
  CentralWhereMonotone,
};

enum class CrossDerivativeRule {
  /// Seven-point splitting: the (+,+)/(-,-) diagonal for a_ij > 0 and the
  /// (+,-)/(-,+) diagonal for a_ij < 0, paid for by the axial weights.
  SignSplit,
};

struct HamiltonianParams {
  DriftScheme drift_scheme = DriftScheme::CentralWhereMonotone;
  CrossDerivativeRule cross_rule = CrossDerivativeRule::SignSplit;
  std::size_t workers = 1;
};

const char* to_string(DriftScheme scheme);

/// Monotone finite-difference discretization of
///   max_u { -f(x,u) . DW - tr[a(x,u) D^2 W] }
/// in Markov-chain form: at an interior node x and control u,
///   H_u(W)(x) = sum_y w_u(x,y) (W(x) - W(y)),  w_u(x,y) >= 0.
/// Where the cross-derivative terms make an axial weight negative the node is
/// flagged and the weight is clamped to zero.
class DiscreteOperator {
 public:
  DiscreteOperator(const Dynamics& dyn, Grid grid, const ControlSet& controls,
                   HamiltonianParams params = {});

  const Grid& grid() const { return grid_; }
  const HamiltonianParams& params() const { return params_; }
  std::size_t control_count() const { return controls_; }
  std::size_t stencil_size() const { return offsets_.size(); }

  std::ptrdiff_t neighbor(std::size_t node, std::size_t s) const {
    return static_cast<std::ptrdiff_t>(node) + offsets_[s];
  }
  std::span<const double> weights(std::size_t node, std::size_t control) const {
    return std::span<const double>(weights_).subspan((node * controls_ + control) * offsets_.size(),
                                                     offsets_.size());
  }
  double total_rate(std::size_t node, std::size_t control) const {
    return total_rate_[node * controls_ + control];
  }

  /// H_u(W)(x) for one control; nodes on the boundary give 0.
  double apply(std::size_t node, std::size_t control, std::span<const double> w) const;

  bool flagged(std::size_t node) const { return flagged_[node] != 0; }
  const std::vector<std::size_t>& flagged_nodes() const { return flagged_list_; }

 private:
  Grid grid_;
  HamiltonianParams params_;
  std::size_t controls_;
  std::vector<std::ptrdiff_t> offsets_;
  std::vector<double> weights_;
  std::vector<double> total_rate_;
  std::vector<std::uint8_t> flagged_;
  std::vector<std::size_t> flagged_list_;
};

struct HamiltonianResult {
  ScalarField value;       ///< max_u H_u(W); 0 on boundary nodes
  FeedbackPolicy argmax;   ///< lowest index among maximizers
  std::vector<std::size_t> flagged_nodes;
};

HamiltonianResult discrete_hamiltonian(const ScalarField& w, const DiscreteOperator& op);

/// H restricted to a fixed policy.
ScalarField hamiltonian_under_policy(const ScalarField& w, const FeedbackPolicy& policy,
                                     const DiscreteOperator& op);

/// Per-node argmax of the discrete Hamiltonian; ties go to the lowest control
/// index so policies are reproducible bit for bit. Boundary nodes get index 0.
FeedbackPolicy extract_policy(const ScalarField& w, const DiscreteOperator& op);

enum class BoundaryRule {
  /// W equals the obstacle on boundary nodes.
  ObstacleValue,
  /// W equals `boundary_values` on boundary nodes.
  Prescribed,
};

/// min{ lambda W + H(W) - l, W - obstacle } = 0 on interior nodes, with
/// Dirichlet data on the boundary. Without an obstacle the second branch is
/// dropped.
struct ObstacleProblem {
  double lambda = 0.1;
  std::optional<ScalarField> obstacle;
  ScalarField running_cost;
  BoundaryRule boundary_rule = BoundaryRule::ObstacleValue;
  std::optional<ScalarField> boundary_values;
};

struct SolveOptions {
  double tol = 1e-8;
  std::size_t max_iter = 200;           ///< policy iteration sweeps
  std::size_t max_value_iter = 200000;  ///< damped value iteration fallback
  double damping = 1.0;
};

struct SolveReport {
  std::size_t iterations = 0;
  double residual = 0.0;
  std::size_t positivity_violations = 0;
  bool converged = false;
  std::string method;
};

struct ObstacleSolution {
  ScalarField value;
  FeedbackPolicy policy;
  std::vector<std::uint8_t> obstacle_active;
  SolveReport report;
};

/// Howard policy iteration on the stop/continue and control choices, falling
/// back to damped Jacobi value iteration when the policies cycle. Requires
/// lambda > 0 and l >= 0.
ObstacleSolution solve_obstacle(const ObstacleProblem& problem, const DiscreteOperator& op,
                                const SolveOptions& options = {},
                                const ObstacleSolution* warm_start = nullptr);

/// Per-node |min{lambda W + H(W) - l, W - obstacle}| (interior) and |W - g|
/// (boundary).
ScalarField complementarity_residual(const ScalarField& w, const ObstacleProblem& problem,
                                     const DiscreteOperator& op);

struct VanishingDiscountResult {
  ScalarField value;
  FeedbackPolicy policy;
  /// table[k][i] solves the problem with obstacle ladder[k] and lambdas[i].
  std::vector<std::vector<ScalarField>> table;
  std::vector<SolveReport> reports;
  double max_discount_violation = 0.0;  ///< max of L_{lambda_i} - L_{lambda_{i+1}}
  double max_obstacle_violation = 0.0;  ///< max of L_k - L_{k+1}
  bool flagged = false;
};

/// Solves over a strictly decreasing lambda schedule and a pointwise
/// nondecreasing obstacle ladder; reports monotonicity defects beyond `tol`.
/// Returns the (smallest lambda, last obstacle) solve as `value`.
VanishingDiscountResult vanishing_discount(const ScalarField& running_cost,
                                           std::span<const double> lambdas,
                                           std::span<const ScalarField> ladder,
                                           const DiscreteOperator& op,
                                           BoundaryRule boundary_rule = BoundaryRule::ObstacleValue,
                                           const std::optional<ScalarField>& boundary_values = {},
                                           const SolveOptions& options = {});

struct InfiniteHorizonOptions {
  double lambda_start = 1.0;
  double lambda_factor = 0.1;
  double lambda_min = 1e-10;
  /// Stop once successive fields differ by less than tol * max(1, |W|_inf).
  double tol = 1e-8;
  double divergence_cap = 1e10;
  /// Dirichlet data on the box boundary; zero (stopped, no further cost) if unset.
  std::optional<ScalarField> boundary_values;
  SolveOptions solve;
};

struct InfiniteHorizonResult {
  ScalarField value;
  FeedbackPolicy policy;
  double lambda_reached = 0.0;
  bool converged = false;
  bool diverged = false;
  std::string message;
  std::vector<double> lambdas;
  std::vector<double> successive_differences;
  std::vector<SolveReport> reports;
};

/// Approximates inf_u E int_0^tau l(X_s) ds on the box by the discounted
/// equation without obstacle, driving lambda down to lambda_min.
InfiniteHorizonResult solve_infinite_horizon(const ScalarField& running_cost,
                                             const DiscreteOperator& op,
                                             const InfiniteHorizonOptions& options = {});

struct SupersolutionReport {
  ScalarField residual;                ///< H(V) - l; 0 on boundary nodes
  std::vector<std::uint8_t> passed;    ///< boundary nodes are not judged
  std::vector<std::size_t> failing_nodes;
  double min_residual = 0.0;
  double tol = 0.0;
  bool all_passed = false;
};

SupersolutionReport verify_supersolution(const ScalarField& v, const ScalarField& running_cost,
                                         const DiscreteOperator& op, double tol = 1e-8);

}  // namespace stochlyap
