#include "stochlyap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

namespace stochlyap {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::Indeterminate:
      return "indeterminate";
    case Verdict::Vacuous:
      return "vacuous";
  }
  return "unknown";
}

const Evidence& CheckReport::find(const std::string& quantity) const {
  for (const auto& e : evidence) {
    if (e.quantity == quantity) return e;
  }
  throw std::out_of_range("check '" + check_name + "' has no evidence named '" + quantity + "'");
}

TargetSet origin_target() {
  return {[](std::span<const double> x) { return euclidean_norm(x); }, 1e-12, "origin"};
}

std::optional<double> shell_min(const ScalarField& v, const DistanceFn& distance, double k) {
  std::optional<double> best;
  std::vector<double> x(v.grid().dim());
  for (std::size_t node = 0; node < v.size(); ++node) {
    v.grid().coordinate(node, x);
    if (distance(x) >= k && (!best || v[node] < *best)) best = v[node];
  }
  return best;
}

std::optional<double> ball_max(const ScalarField& v, const DistanceFn& distance, double r) {
  std::optional<double> best;
  std::vector<double> x(v.grid().dim());
  for (std::size_t node = 0; node < v.size(); ++node) {
    v.grid().coordinate(node, x);
    if (distance(x) <= r && (!best || v[node] > *best)) best = v[node];
  }
  return best;
}

namespace {

std::string label(std::span<const double> x) {
  std::string s = "[x0=";
  char buf[32];
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", x[i]);
    s += (i ? ";" : "") + std::string(buf);
  }
  return s + "]";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

CheckReport start(const CheckSetup& setup, std::string name) {
  CheckReport r;
  r.check_name = std::move(name);
  r.verdict = Verdict::Pass;
  r.config_digest = setup.config_digest;
  r.seed = setup.sim.seed;
  return r;
}

void fail(CheckReport& r) {
  if (r.verdict == Verdict::Pass || r.verdict == Verdict::Vacuous) r.verdict = Verdict::Fail;
}

ScalarFn cost_or_zero(const LyapunovCandidate& cand) {
  if (cand.cost) return cand.cost;
  return [](std::span<const double>) { return 0.0; };
}

struct Prepared {
  DiscreteOperator op;
  ScalarField v;
  ScalarField l;
  FeedbackPolicy policy;
  bool supersolution = false;
};

Prepared prepare(const CheckSetup& setup, const LyapunovCandidate& cand, CheckReport& r) {
  DiscreteOperator op(setup.dyn, setup.grid, setup.controls, setup.hamiltonian);
  ScalarField v = ScalarField::sample(setup.grid, cand.value);
  ScalarField l = ScalarField::sample(setup.grid, cost_or_zero(cand));
  const auto super = verify_supersolution(v, l, op, setup.supersolution_tol);
  r.add("supersolution_min_residual", super.min_residual, setup.supersolution_tol, "grid");
  r.add("supersolution_failing_nodes", static_cast<double>(super.failing_nodes.size()), 0.0, "grid");
  r.add("positivity_violations", static_cast<double>(op.flagged_nodes().size()), 0.0, "grid");
  FeedbackPolicy policy = extract_policy(v, op);
  return {std::move(op), std::move(v), std::move(l), std::move(policy), super.all_passed};
}

SimConfig sim_for(const CheckSetup& setup, std::span<const double> x0, double stop_radius) {
  SimConfig cfg = setup.sim;
  cfg.x0.assign(x0.begin(), x0.end());
  cfg.stop_radius = stop_radius;
  cfg.domain = Box{std::vector<double>(setup.grid.lower().begin(), setup.grid.lower().end()),
                   std::vector<double>(setup.grid.upper().begin(), setup.grid.upper().end())};
  return cfg;
}

Observables observables(const LyapunovCandidate& cand, const DistanceFn& distance) {
  Observables obs;
  obs.distance = distance;
  obs.value = cand.value;
  obs.cost = cand.cost;
  return obs;
}

// Shared by the origin checks and their M-variants so that M = {0} gives the
// same numbers.
void stability_core(const CheckSetup& setup, const LyapunovCandidate& cand, const Prepared& prep,
                    const DistanceFn& distance, double k, const std::vector<std::vector<double>>& x0s,
                    CheckReport& r) {
  const auto m = shell_min(prep.v, distance, k);
  if (!m) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("no grid nodes at distance >= " + num(k));
    return;
  }
  r.add("shell_min", *m, 0.0, "grid");
  if (!(*m > 0.0)) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("candidate vanishes on the shell; bound undefined");
    return;
  }
  const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
  std::vector<std::pair<double, double>> dist_bound;
  for (const auto& x0 : x0s) {
    const double bound = cand.value(x0) / *m;
    const auto ens = simulate_paths(setup.dyn, law, sim_for(setup, x0, k), observables(cand, distance));
    const Estimate e = estimate_exit_probability(ens, k);
    const std::string tag = label(x0);
    r.add("exit_bound" + tag, bound, 0.0, "arithmetic");
    r.add("exit_probability" + tag, e.value, e.half_width, "monte-carlo");
    r.add("aborted_paths" + tag, static_cast<double>(ens.aborted_count()), 0.0, "monte-carlo");
    if (e.value > bound + e.half_width) {
      fail(r);
      r.notes.push_back("exit probability above bound at " + tag);
    }
    dist_bound.emplace_back(distance(x0), bound);
  }
  // The bound must shrink as x0 approaches the target.
  std::sort(dist_bound.begin(), dist_bound.end());
  bool monotone = true;
  for (std::size_t i = 1; i < dist_bound.size(); ++i) {
    if (dist_bound[i].second < dist_bound[i - 1].second - setup.supersolution_tol) monotone = false;
  }
  r.add("bound_nondecreasing_in_distance", monotone ? 1.0 : 0.0, 0.0, "arithmetic");
  if (!dist_bound.empty()) r.add("bound_at_closest_x0", dist_bound.front().second, 0.0, "arithmetic");
  if (!monotone) {
    fail(r);
    r.notes.push_back("bound does not decrease toward the target");
  }
}

void supermartingale_core(const CheckSetup& setup, const LyapunovCandidate& cand,
                          const Prepared& prep, const DistanceFn& distance, double k,
                          std::span<const double> x0, double n_se, CheckReport& r) {
  const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
  const auto ens = simulate_paths(setup.dyn, law, sim_for(setup, x0, k), observables(cand, distance));
  const auto inc = payoff_increments(ens);
  const auto series = payoff_functional(ens);
  // Roundoff floor for deterministic paths, where the standard error is 0.
  const double floor = 1e-12 * (1.0 + std::abs(series.series.front().value));
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  for (std::size_t j = 0; j < inc.size(); ++j) {
    const double z = inc[j].std_error > 0.0 ? inc[j].value / inc[j].std_error
                                            : (inc[j].value > floor ? std::numeric_limits<double>::infinity() : 0.0);
    worst = std::max(worst, z);
    if (inc[j].value > n_se * inc[j].std_error + floor) ++bad;
    r.add("payoff_increment[" + num(ens.report_times[j]) + "->" + num(ens.report_times[j + 1]) + "]",
          inc[j].value, n_se * inc[j].std_error + floor, "monte-carlo");
  }
  r.add("payoff_at_t0", series.series.front().value, 0.0, "monte-carlo");
  r.add("payoff_at_T", series.series.back().value, series.series.back().half_width, "monte-carlo");
  r.add("max_standardized_increment", worst, n_se, "monte-carlo");
  r.add("increments_above_threshold", static_cast<double>(bad), 0.0, "monte-carlo");
  if (bad > 0) {
    fail(r);
    r.notes.push_back(std::to_string(bad) + " payoff increments exceed " + num(n_se) + " standard errors");
  }
}

void require_supersolution(const Prepared& prep, CheckReport& r) {
  if (!prep.supersolution) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("candidate is not a discrete supersolution on the working grid; nothing simulated");
  }
}

// Positive on the shells d >= k/4, k/2, k; zero where d = 0 if asked.
void positive_definite_witness(const ScalarField& f, const char* what, double k, CheckReport& r,
                               bool require_zero_at_origin, const DistanceFn& norm = origin_target().distance) {
  for (double frac : {0.25, 0.5, 1.0}) {
    const auto m = shell_min(f, norm, frac * k);
    if (!m) continue;
    r.add(std::string(what) + "_shell_min[r=" + num(frac * k) + "]", *m, 0.0, "grid");
    if (!(*m > 0.0)) {
      r.verdict = Verdict::Indeterminate;
      r.notes.push_back(std::string(what) + " is not positive on the shell r = " + num(frac * k));
    }
  }
  if (require_zero_at_origin) {
    const auto near = ball_max(f, norm, 0.0);
    if (near) {
      r.add(std::string(what) + "_at_origin", *near, 1e-12, "grid");
      if (std::abs(*near) > 1e-12) {
        r.verdict = Verdict::Indeterminate;
        r.notes.push_back(std::string(what) + " does not vanish at the origin");
      }
    }
  }
}

}  // namespace

CheckReport lyapunov_stability_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                     double k, const std::vector<std::vector<double>>& x0s) {
  CheckReport r = start(setup, "lyapunov_stability");
  Prepared prep = prepare(setup, cand, r);
  positive_definite_witness(prep.v, "V", k, r, true);
  require_supersolution(prep, r);
  if (r.verdict == Verdict::Indeterminate) return r;
  stability_core(setup, cand, prep, origin_target().distance, k, x0s, r);
  return r;
}

CheckReport supermartingale_check(const CheckSetup& setup, const LyapunovCandidate& cand, double k,
                                  const std::vector<double>& x0, double n_se) {
  CheckReport r = start(setup, "supermartingale");
  Prepared prep = prepare(setup, cand, r);
  require_supersolution(prep, r);
  if (r.verdict == Verdict::Indeterminate) return r;
  supermartingale_core(setup, cand, prep, origin_target().distance, k, x0, n_se, r);
  return r;
}

CheckReport lagrange_stability_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                     double rr, const std::vector<double>& s_list) {
  CheckReport r = start(setup, "lagrange_stability");
  Prepared prep = prepare(setup, cand, r);
  require_supersolution(prep, r);
  if (r.verdict == Verdict::Indeterminate) return r;
  if (s_list.empty()) throw std::invalid_argument("lagrange check needs at least one S");
  const DistanceFn norm = origin_target().distance;
  const auto top = ball_max(prep.v, norm, rr);
  if (!top) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("no grid nodes inside the R-ball");
    return r;
  }
  r.add("ball_max[R=" + num(rr) + "]", *top, 0.0, "grid");
  std::vector<double> sorted = s_list;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> ratios;
  for (double s : sorted) {
    const auto m = shell_min(prep.v, norm, s);
    if (!m || !(*m > 0.0)) {
      r.verdict = Verdict::Indeterminate;
      r.notes.push_back("domain does not contain the shell S = " + num(s));
      return r;
    }
    ratios.push_back(*top / *m);
    r.add("ratio[S=" + num(s) + "]", ratios.back(), 0.0, "arithmetic");
  }
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    if (ratios[i] > ratios[i - 1] + setup.supersolution_tol) {
      fail(r);
      r.notes.push_back("ratio increases with S");
    }
  }
  if (std::all_of(ratios.begin(), ratios.end(), [](double q) { return q >= 1.0; })) {
    r.verdict = Verdict::Vacuous;
    r.notes.push_back("every ratio is >= 1; the bound says nothing");
    return r;
  }

  // Spot check from the point of the R-ball where V is largest.
  std::vector<double> x0(setup.grid.dim()), x(setup.grid.dim());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < prep.v.size(); ++node) {
    setup.grid.coordinate(node, x);
    if (norm(x) <= rr && prep.v[node] > best) {
      best = prep.v[node];
      x0 = x;
    }
  }
  const double s = sorted.back();
  const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
  const auto ens = simulate_paths(setup.dyn, law, sim_for(setup, x0, s), observables(cand, norm));
  const Estimate e = estimate_exit_probability(ens, s);
  r.add("spot_exit_probability" + label(x0), e.value, e.half_width, "monte-carlo");
  if (e.value > ratios.back() + e.half_width) {
    fail(r);
    r.notes.push_back("simulated P(sup >= S) above the ratio");
  }
  return r;
}

CheckReport asymptotic_stability_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                       double k, const std::vector<std::vector<double>>& x0s,
                                       double rho, double tail) {
  CheckReport r = start(setup, "asymptotic_stability");
  if (!cand.cost) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("candidate has no running cost; not strict");
    return r;
  }
  Prepared prep = prepare(setup, cand, r);
  positive_definite_witness(prep.l, "l", k, r, false);
  require_supersolution(prep, r);
  if (r.verdict == Verdict::Indeterminate) return r;
  const DistanceFn norm = origin_target().distance;
  const auto m = shell_min(prep.v, norm, k);
  if (!m || !(*m > 0.0)) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("no usable shell at k = " + num(k));
    return r;
  }
  r.notes.push_back("attraction is estimated on the tail window [T - " + num(tail) +
                    ", T]; a finite-horizon proxy for the limsup event");
  const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
  const double horizon = setup.sim.horizon;
  for (const auto& x0 : x0s) {
    SimConfig cfg = sim_for(setup, x0, k);
    cfg.tail_windows = {tail};
    const auto ens = simulate_paths(setup.dyn, law, cfg, observables(cand, norm));
    const double bound = cand.value(x0) / *m;
    const Estimate a = estimate_attraction(ens, rho, tail);
    const std::string tag = label(x0);
    r.add("attraction_bound" + tag, bound, 0.0, "arithmetic");
    r.add("attraction_estimate" + tag, a.value, a.half_width, "monte-carlo");
    if (a.value > bound + a.half_width) {
      fail(r);
      r.notes.push_back("attraction estimate above bound at " + tag);
    }
    try {
      const Estimate c = cost_increment(ens, 0.5 * horizon, horizon);
      r.add("cost_increment_tail" + tag, c.value, 3.0 * c.std_error, "monte-carlo");
      if (c.value > 3.0 * c.std_error + 1e-12) {
        fail(r);
        r.notes.push_back("running cost still accrues over [T/2, T] at " + tag);
      }
    } catch (const std::invalid_argument&) {
      r.verdict = Verdict::Indeterminate;
      r.notes.push_back("T/2 is not a report time; set report_interval to divide T/2");
    }
  }
  return r;
}

CheckReport representation_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                 const std::vector<std::vector<double>>& x0s,
                                 const RepresentationOptions& options) {
  CheckReport r = start(setup, "representation");
  Prepared prep = prepare(setup, cand, r);
  require_supersolution(prep, r);
  if (r.verdict == Verdict::Indeterminate) return r;
  const DistanceFn norm = origin_target().distance;
  std::vector<std::size_t> constants = options.constant_policies;
  if (constants.empty()) {
    for (std::size_t c = 0; c < setup.controls.size(); ++c) constants.push_back(c);
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& x0 : x0s) {
    const std::string tag = label(x0);
    const double v0 = cand.value(x0);
    r.add("V" + tag, v0, 0.0, "arithmetic");
    {
      const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
      const auto ens = simulate_paths(setup.dyn, law, sim_for(setup, x0, inf), observables(cand, norm));
      const auto pay = payoff_functional(ens);
      const double eps = pay.sup.value - v0;
      const double allowed = options.rel_tol * std::abs(v0) + options.abs_tol;
      r.add("payoff_hjb" + tag, pay.sup.value, pay.sup.half_width, "monte-carlo");
      r.add("eps_rep" + tag, eps, allowed + pay.sup.half_width, "monte-carlo");
      if (eps > allowed + pay.sup.half_width) {
        fail(r);
        r.notes.push_back("HJB-policy payoff exceeds V by more than the tolerance at " + tag);
      }
    }
    for (std::size_t c : constants) {
      const ControlLaw law = ControlLaw::constant(setup.controls, c);
      const auto ens = simulate_paths(setup.dyn, law, sim_for(setup, x0, inf), observables(cand, norm));
      const auto pay = payoff_functional(ens);
      r.add("payoff_constant[" + std::to_string(c) + "]" + tag, pay.sup.value, pay.sup.half_width,
            "monte-carlo");
      if (v0 > pay.sup.value + pay.sup.half_width + options.abs_tol) {
        fail(r);
        r.notes.push_back("V above the payoff of constant control " + std::to_string(c) + " at " + tag);
      }
    }
  }
  return r;
}

CheckReport minimality_check(const CheckSetup& setup, const ScalarField& v, const ScalarField& l,
                             const MinimalityOptions& options) {
  CheckReport r = start(setup, "minimality");
  if (!(v.grid() == setup.grid) || !(l.grid() == setup.grid)) {
    throw std::invalid_argument("minimality_check: fields must live on the setup grid");
  }
  DiscreteOperator op(setup.dyn, setup.grid, setup.controls, setup.hamiltonian);
  const auto super = verify_supersolution(v, l, op, setup.supersolution_tol);
  r.add("supersolution_min_residual", super.min_residual, setup.supersolution_tol, "grid");
  r.add("V_min", v.min(), 0.0, "grid");
  if (!super.all_passed || v.min() < 0.0) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("V must be a nonnegative discrete supersolution");
    return r;
  }
  InfiniteHorizonOptions solve = options.solve;
  solve.boundary_values = v;
  const auto vinf = solve_infinite_horizon(l, op, solve);
  r.add("lambda_reached", vinf.lambda_reached, 0.0, "solver");
  if (vinf.diverged) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back(vinf.message);
    return r;
  }
  if (!vinf.converged) r.notes.push_back("infinite-horizon solve: " + vinf.message);
  double worst = -std::numeric_limits<double>::infinity(), dominance = 0.0, band = 0.0;
  std::vector<double> x(setup.grid.dim());
  for (std::size_t node = 0; node < v.size(); ++node) {
    const double gap = vinf.value[node] - v[node];
    worst = std::max(worst, gap);
    dominance = std::max(dominance, -gap);
    setup.grid.coordinate(node, x);
    const double d = euclidean_norm(x);
    if (!setup.grid.is_boundary(node) && d >= options.band_lo && d <= options.band_hi && v[node] > 0.0) {
      band = std::max(band, std::abs(gap) / v[node]);
    }
  }
  r.add("max_Vinf_minus_V", worst, options.grid_tol, "solver");
  r.add("max_V_minus_Vinf", dominance, 0.0, "solver");
  r.add("band_relative_gap", band, 0.0, "solver");
  if (worst > options.grid_tol) {
    fail(r);
    r.notes.push_back("V dips below the infinite-horizon value");
  }
  return r;
}

CheckReport subsolution_value_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                                    const std::vector<std::vector<double>>& x0s, double rel_tol,
                                    double abs_tol) {
  CheckReport r = start(setup, "subsolution_value");
  DiscreteOperator op(setup.dyn, setup.grid, setup.controls, setup.hamiltonian);
  const ScalarField u = ScalarField::sample(setup.grid, cand.value);
  const ScalarField l = ScalarField::sample(setup.grid, cost_or_zero(cand));
  const auto ham = discrete_hamiltonian(u, op);
  double excess = -std::numeric_limits<double>::infinity(), defect = 0.0;
  for (std::size_t node = 0; node < u.size(); ++node) {
    if (setup.grid.is_boundary(node)) continue;
    excess = std::max(excess, ham.value[node] - l[node]);
    defect = std::max(defect, std::abs(ham.value[node] - l[node]));
  }
  r.add("subsolution_max_excess", excess, setup.supersolution_tol, "grid");
  if (excess > setup.supersolution_tol) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("U is not a discrete subsolution on the working grid");
    return r;
  }
  const bool equality = defect <= setup.supersolution_tol;
  r.add("solves_with_equality", equality ? 1.0 : 0.0, setup.supersolution_tol, "grid");
  const DistanceFn norm = origin_target().distance;
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& x0 : x0s) {
    const std::string tag = label(x0);
    const double u0 = cand.value(x0);
    double lowest = inf, lowest_hw = 0.0;
    auto judge = [&](const ControlLaw& law, const std::string& name) {
      const auto ens = simulate_paths(setup.dyn, law, sim_for(setup, x0, inf), observables(cand, norm));
      const auto pay = inf_payoff_functional(ens);
      r.add("inf_payoff_" + name + tag, pay.sup.value, pay.sup.half_width, "monte-carlo");
      if (pay.sup.value < u0 - pay.sup.half_width - abs_tol) {
        fail(r);
        r.notes.push_back("inf-payoff below U under " + name + " at " + tag);
      }
      if (pay.sup.value < lowest) {
        lowest = pay.sup.value;
        lowest_hw = pay.sup.half_width;
      }
    };
    judge(ControlLaw::feedback(setup.controls, extract_policy(u, op)), "hjb");
    for (std::size_t c = 0; c < setup.controls.size(); ++c) {
      judge(ControlLaw::constant(setup.controls, c), "constant[" + std::to_string(c) + "]");
    }
    r.add("inf_payoff_min" + tag, lowest, lowest_hw, "monte-carlo");
    if (equality && std::abs(lowest - u0) > rel_tol * std::abs(u0) + lowest_hw + abs_tol) {
      fail(r);
      r.notes.push_back("minimizing inf-payoff differs from U at " + tag);
    }
  }
  return r;
}

CheckReport attractor_check(const CheckSetup& setup, const LyapunovCandidate& cand,
                            const TargetSet& target, double k,
                            const std::vector<std::vector<double>>& x0s, double n_se) {
  CheckReport r = start(setup, "attractor");
  r.notes.push_back("target: " + target.description);
  Prepared prep = prepare(setup, cand, r);

  // V and l must vanish on M, and d should be 1-Lipschitz.
  std::vector<double> x(setup.grid.dim()), y(setup.grid.dim());
  double on_target = 0.0;
  std::size_t members = 0;
  for (std::size_t node = 0; node < prep.v.size(); ++node) {
    setup.grid.coordinate(node, x);
    if (target.distance(x) <= target.membership_tol) {
      ++members;
      on_target = std::max({on_target, std::abs(prep.v[node]), std::abs(prep.l[node])});
    }
  }
  r.add("target_nodes", static_cast<double>(members), 0.0, "grid");
  r.add("max_V_l_on_target", on_target, setup.supersolution_tol, "grid");
  if (on_target > setup.supersolution_tol) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("V or l does not vanish on the target");
  }
  std::mt19937_64 rng(setup.sim.seed);
  std::uniform_int_distribution<std::size_t> pick(0, prep.v.size() - 1);
  double lip = 0.0;
  for (int t = 0; t < 256; ++t) {
    setup.grid.coordinate(pick(rng), x);
    setup.grid.coordinate(pick(rng), y);
    double dx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dx += (x[i] - y[i]) * (x[i] - y[i]);
    dx = std::sqrt(dx);
    if (dx > 0.0) lip = std::max(lip, std::abs(target.distance(x) - target.distance(y)) / dx);
  }
  r.add("distance_lipschitz_ratio", lip, 1e-12, "grid");
  positive_definite_witness(prep.v, "V", k, r, true, target.distance);
  if (lip > 1.0 + 1e-12) {
    r.verdict = Verdict::Indeterminate;
    r.notes.push_back("distance callable is not 1-Lipschitz on sampled pairs");
  }
  require_supersolution(prep, r);
  if (r.verdict == Verdict::Indeterminate) return r;
  stability_core(setup, cand, prep, target.distance, k, x0s, r);
  if (!x0s.empty()) supermartingale_core(setup, cand, prep, target.distance, k, x0s.front(), n_se, r);
  return r;
}

CheckReport modulus_bound_check(const CheckSetup& setup, const LyapunovCandidate& cand, double k,
                                const std::vector<std::vector<double>>& x0s, double t, double h,
                                double r) {
  CheckReport rep = start(setup, "modulus_bound");
  Prepared prep = prepare(setup, cand, rep);
  require_supersolution(prep, rep);
  if (rep.verdict == Verdict::Indeterminate) return rep;
  const auto bounds = scan_coefficient_bounds(setup.dyn, setup.controls, setup.grid, k);
  rep.add("drift_bound_F", bounds.drift, 0.0, "grid");
  rep.add("diffusion_bound_Sigma", bounds.diffusion, 0.0, "grid");
  const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
  bool all_vacuous = true;
  for (const auto& x0 : x0s) {
    SimConfig cfg = sim_for(setup, x0, k);
    cfg.modulus_windows = {{t, h}};
    if (cfg.horizon < t + h) cfg.horizon = t + h;
    const auto ens = simulate_paths(setup.dyn, law, cfg, observables(cand, {}));
    const auto m = check_modulus_bound(ens, t, h, r, bounds.drift, bounds.diffusion);
    const std::string tag = label(x0);
    rep.add("modulus_bound" + tag, m.bound, 0.0, "arithmetic");
    rep.add("modulus_probability" + tag, m.empirical.value, m.empirical.half_width, "monte-carlo");
    if (!m.vacuous) all_vacuous = false;
    if (!m.passed) {
      fail(rep);
      rep.notes.push_back("increment probability above the Chebyshev bound at " + tag);
    }
  }
  if (all_vacuous && rep.verdict == Verdict::Pass) {
    rep.verdict = Verdict::Vacuous;
    rep.notes.push_back("bound is >= 1 at (t, h, r) = (" + num(t) + ", " + num(h) + ", " + num(r) +
                       "); it holds trivially");
  }
  return rep;
}

CheckReport occupation_time_check(const CheckSetup& setup, const LyapunovCandidate& cand, double k,
                                  const std::vector<std::vector<double>>& x0s, double r) {
  CheckReport rep = start(setup, "occupation_time");
  Prepared prep = prepare(setup, cand, rep);
  require_supersolution(prep, rep);
  if (rep.verdict == Verdict::Indeterminate) return rep;
  // Only nodes inside the stopping ball matter for the cost floor.
  const DistanceFn norm = [](std::span<const double> x) { return euclidean_norm(x); };
  std::optional<double> lmin;
  std::vector<double> x(setup.grid.dim());
  for (std::size_t node = 0; node < prep.l.size(); ++node) {
    setup.grid.coordinate(node, x);
    const double d = norm(x);
    if (d >= r && d <= k && (!lmin || prep.l[node] < *lmin)) lmin = prep.l[node];
  }
  if (!lmin || !(*lmin > 0.0)) {
    rep.verdict = Verdict::Indeterminate;
    rep.notes.push_back("running cost is not positive on r <= |x| <= k; no occupation bound");
    return rep;
  }
  rep.add("cost_floor", *lmin, 0.0, "grid");
  const ControlLaw law = ControlLaw::feedback(setup.controls, prep.policy);
  for (const auto& x0 : x0s) {
    SimConfig cfg = sim_for(setup, x0, k);
    cfg.occupation_radii = {r};
    const auto ens = simulate_paths(setup.dyn, law, cfg, observables(cand, norm));
    const Estimate e = occupation_time(ens, r);
    const double bound = cand.value(x0) / *lmin;
    const std::string tag = label(x0);
    rep.add("occupation_bound" + tag, bound, 0.0, "arithmetic");
    rep.add("occupation_time" + tag, e.value, e.half_width, "monte-carlo");
    if (e.value > bound + e.half_width) {
      fail(rep);
      rep.notes.push_back("occupation time above V(x0) / min l at " + tag);
    }
  }
  return rep;
}

CheckReport small_intensity_check(const ScalarFn& big_l, const std::vector<IntensityEntry>& table,
                                  const Dynamics& dyn, const ControlSet& controls, const Grid& grid,
                                  double rel_tol) {
  CheckReport r;
  r.check_name = "small_intensity";
  r.verdict = Verdict::Pass;
  const DiffusionMatrixCache cache(dyn, grid, controls);
  const std::size_t n = grid.dim();
  std::vector<double> x(n);
  for (const auto& entry : table) {
    if (!(entry.c_delta > 0.0)) throw std::invalid_argument("small_intensity_check: C_delta must be > 0");
    std::size_t checked = 0, failing = 0, strict = 0;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
      grid.coordinate(node, x);
      if (!(euclidean_norm(x) > entry.delta)) continue;
      ++checked;
      double tr = 0.0;
      for (std::size_t c = 0; c < controls.size(); ++c) {
        const auto a = cache.a(node, c);
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) t += a[i * n + i];
        tr = std::max(tr, t);
      }
      const double allowed = big_l(x) / entry.c_delta;
      if (tr > allowed + rel_tol * std::max(std::abs(allowed), tr)) ++failing;
      if (tr < allowed) ++strict;
      margin = std::min(margin, allowed - tr);
    }
    const std::string tag = "[delta=" + num(entry.delta) + ",C=" + num(entry.c_delta) + "]";
    r.add("nodes_checked" + tag, static_cast<double>(checked), 0.0, "grid");
    r.add("nodes_failing" + tag, static_cast<double>(failing), 0.0, "grid");
    r.add("nodes_strict" + tag, static_cast<double>(strict), 0.0, "grid");
    r.add("min_margin" + tag, checked ? margin : 0.0, rel_tol, "grid");
    if (checked == 0) {
      r.verdict = Verdict::Indeterminate;
      r.notes.push_back("no nodes beyond delta " + num(entry.delta));
    } else if (failing > 0) {
      fail(r);
    }
  }
  return r;
}

ScalarField small_intensity_cost(const ScalarFn& big_l, const IntensityEntry& entry,
                                 const Dynamics& dyn, const ControlSet& controls, const Grid& grid) {
  const DiffusionMatrixCache cache(dyn, grid, controls);
  const std::size_t n = grid.dim();
  std::vector<double> out(grid.node_count(), 0.0), x(n);
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    grid.coordinate(node, x);
    if (!(euclidean_norm(x) > entry.delta)) continue;
    double tr = 0.0;
    for (std::size_t c = 0; c < controls.size(); ++c) {
      const auto a = cache.a(node, c);
      double t = 0.0;
      for (std::size_t i = 0; i < n; ++i) t += a[i * n + i];
      tr = std::max(tr, t);
    }
    out[node] = std::max(0.0, big_l(x) - entry.c_delta * tr);
  }
  return ScalarField(grid, std::move(out));
}

CheckReport radial_condition_check(double gamma, const Dynamics& dyn, const ControlSet& controls,
                                   const Grid& grid, double rel_tol) {
  if (!(gamma > 0.0 && gamma <= 2.0)) {
    throw std::invalid_argument("radial_condition_check: gamma must lie in (0, 2]");
  }
  CheckReport r;
  r.check_name = "radial_condition";
  r.verdict = Verdict::Pass;
  const DiffusionMatrixCache cache(dyn, grid, controls);
  const std::size_t n = grid.dim();
  std::vector<double> x(n);
  std::size_t checked = 0, failing = 0, sufficient = 0, skipped = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    grid.coordinate(node, x);
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    if (r2 == 0.0) {
      ++skipped;
      continue;
    }
    ++checked;
    double best = -std::numeric_limits<double>::infinity(), scale = 0.0;
    bool suff = false;
    for (std::size_t c = 0; c < controls.size(); ++c) {
      const auto f = cache.drift(node, c);
      const auto a = cache.a(node, c);
      double fx = 0.0, tr = 0.0, xax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        fx += f[i] * x[i];
        tr += a[i * n + i];
        for (std::size_t j = 0; j < n; ++j) xax += x[i] * a[i * n + j] * x[j];
      }
      const double radial = (gamma - 2.0) * xax / r2;
      const double val = -fx - tr - radial;
      best = std::max(best, val);
      scale = std::max(scale, std::abs(fx) + tr + std::abs(radial));
      if (fx + tr <= 0.0) suff = true;
    }
    if (best < -rel_tol * scale) ++failing;
    if (suff) ++sufficient;
    worst = std::min(worst, best / r2);
  }
  const std::string tag = "[gamma=" + num(gamma) + "]";
  r.add("nodes_checked" + tag, static_cast<double>(checked), 0.0, "grid");
  r.add("nodes_skipped_at_origin" + tag, static_cast<double>(skipped), 0.0, "grid");
  r.add("nodes_failing" + tag, static_cast<double>(failing), 0.0, "grid");
  r.add("nodes_sufficient" + tag, static_cast<double>(sufficient), 0.0, "grid");
  r.add("min_condition_over_r2" + tag, checked ? worst : 0.0, rel_tol, "grid");
  if (checked == 0) {
    r.verdict = Verdict::Indeterminate;
  } else if (failing > 0) {
    r.verdict = Verdict::Fail;
  }
  return r;
}

}  // namespace stochlyap
