#include "stochlyap/sde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "stochlyap/parallel.hpp"

namespace stochlyap {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t steps_for(double duration, double dt) {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

bool outside(const SimConfig& cfg, std::span<const double> x, double d) {
  if (d >= cfg.stop_radius) return true;
  if (cfg.domain) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] <= cfg.domain->lower[i] || x[i] >= cfg.domain->upper[i]) return true;
    }
  }
  return false;
}

void validate(const Dynamics& dyn, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw std::invalid_argument("sim: dt must be > 0");
  if (!(cfg.horizon >= cfg.dt) || !std::isfinite(cfg.horizon)) {
    throw std::invalid_argument("sim: horizon must be >= dt");
  }
  if (cfg.n_paths == 0) throw std::invalid_argument("sim: n_paths must be >= 1");
  if (cfg.x0.size() != dyn.dim_state) throw std::invalid_argument("sim: x0 has the wrong dimension");
  for (double v : cfg.x0) {
    if (!std::isfinite(v)) throw std::invalid_argument("sim: x0 not finite");
  }
  if (!(cfg.stop_radius > 0.0)) throw std::invalid_argument("sim: stop radius must be > 0");
  if (cfg.domain && (cfg.domain->lower.size() != dyn.dim_state || cfg.domain->upper.size() != dyn.dim_state)) {
    throw std::invalid_argument("sim: domain box has the wrong dimension");
  }
  for (double w : cfg.tail_windows) {
    if (!(w >= 0.0) || w > cfg.horizon) throw std::invalid_argument("sim: tail window outside [0, T]");
  }
  for (double r : cfg.occupation_radii) {
    if (!(r >= 0.0)) throw std::invalid_argument("sim: occupation radius must be >= 0");
  }
  for (const auto& [t, h] : cfg.modulus_windows) {
    if (!(t >= 0.0) || !(h > 0.0) || t + h > cfg.horizon * (1.0 + 1e-12)) {
      throw std::invalid_argument("sim: modulus window outside [0, T]");
    }
  }
}

std::vector<double> included(const PathEnsemble& ens, const std::function<double(std::size_t)>& f) {
  std::vector<double> out;
  out.reserve(ens.n_paths());
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    if (!ens.aborted[p]) out.push_back(f(p));
  }
  if (out.empty()) throw std::runtime_error("every path was aborted");
  return out;
}

std::size_t count_if_included(const PathEnsemble& ens, const std::function<bool(std::size_t)>& f,
                              std::size_t& n) {
  std::size_t hits = 0;
  n = 0;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    if (ens.aborted[p]) continue;
    ++n;
    if (f(p)) ++hits;
  }
  if (n == 0) throw std::runtime_error("every path was aborted");
  return hits;
}

std::size_t find_value(std::span<const double> values, double v, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i] - v) <= 1e-12 * std::max(1.0, std::abs(v))) return i;
  }
  throw std::invalid_argument(std::string(what) + " was not requested in the simulation config");
}

}  // namespace

double euclidean_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

ControlLaw::ControlLaw(const ControlSet& controls, std::optional<FeedbackPolicy> policy,
                       std::size_t index)
    : controls_(controls), policy_(std::move(policy)), index_(index) {}

ControlLaw ControlLaw::constant(const ControlSet& controls, std::size_t index) {
  if (index >= controls.size()) throw std::out_of_range("constant control index out of range");
  return ControlLaw(controls, std::nullopt, index);
}

ControlLaw ControlLaw::feedback(const ControlSet& controls, FeedbackPolicy policy) {
  if (policy.control_count() != controls.size()) {
    throw std::invalid_argument("policy was built for a different control set");
  }
  return ControlLaw(controls, std::move(policy), 0);
}

std::span<const double> ControlLaw::operator()(std::span<const double> x) const {
  return controls_.point(policy_ ? policy_->lookup(x) : index_);
}

std::string ControlLaw::description() const {
  if (policy_) return "feedback policy";
  return "constant control #" + std::to_string(index_);
}

std::size_t PathEnsemble::aborted_count() const {
  return static_cast<std::size_t>(std::count(aborted.begin(), aborted.end(), 1));
}

std::size_t PathEnsemble::report_index(double t) const {
  for (std::size_t j = 0; j < report_times.size(); ++j) {
    if (std::abs(report_times[j] - t) <= 0.5 * dt) return j;
  }
  throw std::invalid_argument("time " + std::to_string(t) + " is not a report time");
}

PathEnsemble simulate_paths(const Dynamics& dyn, const ControlLaw& control, const SimConfig& cfg,
                            const Observables& obs) {
  validate(dyn, cfg);
  const std::size_t n = dyn.dim_state, m = dyn.dim_noise, np = cfg.n_paths;
  const auto distance = obs.distance ? obs.distance : std::function<double(std::span<const double>)>(euclidean_norm);

  PathEnsemble ens;
  ens.config = cfg;
  ens.dim = n;
  ens.steps = std::max<std::size_t>(1, steps_for(cfg.horizon, cfg.dt));
  ens.dt = cfg.horizon / static_cast<double>(ens.steps);
  const double dt = ens.dt;

  const std::size_t stride = cfg.report_interval > 0.0
                                 ? std::max<std::size_t>(1, steps_for(cfg.report_interval, dt))
                                 : ens.steps;
  for (std::size_t s = 0; s < ens.steps; s += stride) ens.report_steps.push_back(s);
  ens.report_steps.push_back(ens.steps);
  for (auto s : ens.report_steps) ens.report_times.push_back(static_cast<double>(s) * dt);
  const std::size_t nr = ens.report_steps.size();

  std::vector<std::size_t> tail_start;
  for (double w : cfg.tail_windows) tail_start.push_back(ens.steps - std::min(ens.steps, steps_for(w, dt)));
  std::vector<std::pair<std::size_t, std::size_t>> mod_steps;
  for (const auto& [t, h] : cfg.modulus_windows) {
    const std::size_t a = steps_for(t, dt);
    mod_steps.emplace_back(a, std::min(ens.steps, a + std::max<std::size_t>(1, steps_for(h, dt))));
  }
  const std::size_t no = cfg.occupation_radii.size(), nt = tail_start.size(), nm = mod_steps.size();

  ens.exited.assign(np, 0);
  ens.aborted.assign(np, 0);
  ens.exit_time.assign(np, cfg.horizon);
  ens.max_distance.assign(np, 0.0);
  ens.running_cost.assign(np, 0.0);
  ens.terminal.assign(np * n, 0.0);
  ens.payoff.assign(np * nr, 0.0);
  ens.cost_at.assign(np * nr, 0.0);
  ens.occupation.assign(np * no, 0.0);
  ens.tail_max.assign(np * nt, 0.0);
  ens.modulus.assign(np * nm, 0.0);
  std::vector<std::vector<PathEnsemble::Sample>> dumps(std::min(np, cfg.dump_paths));

  parallel_for(np, cfg.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(n), prev(n), f(n), sig(n * m), dw(m);
    std::vector<std::vector<double>> anchor(nm, std::vector<double>(n));
    for (std::size_t p = begin; p < end; ++p) {
      std::mt19937_64 rng(splitmix64(cfg.seed + p));
      std::normal_distribution<double> normal(0.0, 1.0);
      const double sqdt = std::sqrt(dt);
      std::copy(cfg.x0.begin(), cfg.x0.end(), x.begin());
      double d = distance(x);
      double cost = 0.0, max_d = d;
      bool stopped = outside(cfg, x, d);
      if (stopped) {
        ens.exited[p] = 1;
        ens.exit_time[p] = 0.0;
      }
      std::size_t next_report = 0;
      const bool dumping = p < dumps.size() && cfg.dump_every > 0;

      auto record = [&](std::size_t s) {
        if (next_report < nr && ens.report_steps[next_report] == s) {
          const double v = obs.value ? obs.value(x) : 0.0;
          ens.payoff[p * nr + next_report] = v + cost;
          ens.cost_at[p * nr + next_report] = cost;
          ++next_report;
        }
        for (std::size_t k = 0; k < nt; ++k) {
          if (s >= tail_start[k]) ens.tail_max[p * nt + k] = std::max(ens.tail_max[p * nt + k], d);
        }
        for (std::size_t k = 0; k < nm; ++k) {
          if (s == mod_steps[k].first) anchor[k] = x;
          if (s >= mod_steps[k].first && s <= mod_steps[k].second) {
            double e = 0.0;
            for (std::size_t i = 0; i < n; ++i) e += (x[i] - anchor[k][i]) * (x[i] - anchor[k][i]);
            ens.modulus[p * nm + k] = std::max(ens.modulus[p * nm + k], std::sqrt(e));
          }
        }
        if (dumping && s % cfg.dump_every == 0) dumps[p].push_back({p, s, x});
      };

      record(0);
      for (std::size_t step = 0; step < ens.steps; ++step) {
        if (!stopped) {
          cost += (obs.cost ? obs.cost(x) : 0.0) * dt;
          for (std::size_t k = 0; k < no; ++k) {
            if (d >= cfg.occupation_radii[k]) ens.occupation[p * no + k] += dt;
          }
          const auto u = control(x);
          dyn.drift(x, u, f);
          dyn.diffusion(x, u, sig);
          for (std::size_t j = 0; j < m; ++j) dw[j] = sqdt * normal(rng);
          prev = x;
          bool finite = true;
          for (std::size_t i = 0; i < n; ++i) {
            double inc = f[i] * dt;
            for (std::size_t j = 0; j < m; ++j) inc += sig[i * m + j] * dw[j];
            x[i] += inc;
            finite = finite && std::isfinite(x[i]);
          }
          if (!finite) {
            x = prev;
            ens.aborted[p] = 1;
            stopped = true;
          } else {
            d = distance(x);
            max_d = std::max(max_d, d);
            if (outside(cfg, x, d)) {
              stopped = true;
              ens.exited[p] = 1;
              ens.exit_time[p] = static_cast<double>(step + 1) * dt;
            }
          }
        }
        record(step + 1);
      }
      ens.max_distance[p] = max_d;
      ens.running_cost[p] = cost;
      std::copy(x.begin(), x.end(), ens.terminal.begin() + static_cast<std::ptrdiff_t>(p * n));
    }
  });
  for (auto& d : dumps) {
    for (auto& s : d) ens.dumped.push_back(std::move(s));
  }
  return ens;
}

Estimate estimate_exit_probability(const PathEnsemble& ens, double k) {
  if (k > ens.config.stop_radius) {
    throw std::invalid_argument("exit radius exceeds the simulation stop radius");
  }
  std::size_t n = 0;
  const std::size_t hits = count_if_included(ens, [&](std::size_t p) { return ens.max_distance[p] >= k; }, n);
  return wilson_estimate(hits, n);
}

Estimate estimate_attraction(const PathEnsemble& ens, double rho, double tail) {
  if (!(tail < ens.config.horizon)) throw std::invalid_argument("tail window must be shorter than T");
  const std::size_t k = find_value(ens.config.tail_windows, tail, "tail window");
  const std::size_t nt = ens.config.tail_windows.size();
  std::size_t n = 0;
  const std::size_t hits =
      count_if_included(ens, [&](std::size_t p) { return ens.tail_max[p * nt + k] > rho; }, n);
  return wilson_estimate(hits, n);
}

Estimate occupation_time(const PathEnsemble& ens, double r) {
  const std::size_t k = find_value(ens.config.occupation_radii, r, "occupation radius");
  const std::size_t no = ens.config.occupation_radii.size();
  const auto v = included(ens, [&](std::size_t p) { return ens.occupation[p * no + k]; });
  return mean_estimate(v);
}

namespace {

PayoffResult payoff_extreme(const PathEnsemble& ens, bool maximize) {
  PayoffResult out;
  out.times = ens.report_times;
  const std::size_t nr = ens.report_count();
  for (std::size_t j = 0; j < nr; ++j) {
    const auto v = included(ens, [&](std::size_t p) { return ens.payoff[p * nr + j]; });
    out.series.push_back(mean_estimate(v));
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < nr; ++j) {
    const bool better = maximize ? out.series[j].value > out.series[best].value
                                 : out.series[j].value < out.series[best].value;
    if (better) best = j;
  }
  out.sup = out.series[best];
  out.argmax_time = out.times[best];
  return out;
}

}  // namespace

PayoffResult payoff_functional(const PathEnsemble& ens) { return payoff_extreme(ens, true); }

PayoffResult inf_payoff_functional(const PathEnsemble& ens) { return payoff_extreme(ens, false); }

PayoffResult payoff_functional(const Dynamics& dyn, const ControlLaw& control, const ScalarFn& v,
                               const ScalarFn& l, const SimConfig& cfg) {
  Observables obs;
  obs.value = v;
  obs.cost = l;
  return payoff_functional(simulate_paths(dyn, control, cfg, obs));
}

std::vector<Estimate> payoff_increments(const PathEnsemble& ens) {
  const std::size_t nr = ens.report_count();
  std::vector<Estimate> out;
  for (std::size_t j = 0; j + 1 < nr; ++j) {
    const auto v = included(ens, [&](std::size_t p) {
      return ens.payoff[p * nr + j + 1] - ens.payoff[p * nr + j];
    });
    out.push_back(mean_estimate(v));
  }
  return out;
}

Estimate cost_increment(const PathEnsemble& ens, double t_from, double t_to) {
  const std::size_t a = ens.report_index(t_from), b = ens.report_index(t_to);
  const std::size_t nr = ens.report_count();
  const auto v = included(ens, [&](std::size_t p) { return ens.cost_at[p * nr + b] - ens.cost_at[p * nr + a]; });
  return mean_estimate(v);
}

CoefficientBounds scan_coefficient_bounds(const Dynamics& dyn, const ControlSet& controls,
                                          const Grid& grid, double radius,
                                          const std::function<double(std::span<const double>)>& distance) {
  CoefficientBounds b;
  std::vector<double> x(grid.dim());
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    grid.coordinate(node, x);
    const double d = distance ? distance(x) : euclidean_norm(x);
    if (d > radius) continue;
    ++b.points;
    for (std::size_t c = 0; c < controls.size(); ++c) {
      b.drift = std::max(b.drift, euclidean_norm(evaluate_drift(dyn, x, controls.point(c))));
      b.diffusion = std::max(b.diffusion, euclidean_norm(evaluate_diffusion(dyn, x, controls.point(c))));
    }
  }
  return b;
}

ModulusCheck check_modulus_bound(const PathEnsemble& ens, double t, double h, double r,
                                 double f_bound, double sigma_bound) {
  if (!(r > 0.0)) throw std::invalid_argument("modulus radius must be > 0");
  const auto& wins = ens.config.modulus_windows;
  std::size_t k = wins.size();
  for (std::size_t i = 0; i < wins.size(); ++i) {
    if (std::abs(wins[i].first - t) <= 1e-12 * std::max(1.0, t) &&
        std::abs(wins[i].second - h) <= 1e-12 * std::max(1.0, h)) {
      k = i;
    }
  }
  if (k == wins.size()) throw std::invalid_argument("modulus window was not requested in the simulation config");
  std::size_t n = 0;
  const std::size_t hits =
      count_if_included(ens, [&](std::size_t p) { return ens.modulus[p * wins.size() + k] > r; }, n);
  ModulusCheck out;
  out.empirical = wilson_estimate(hits, n);
  out.bound = (2.0 * f_bound * f_bound * h * h + 8.0 * sigma_bound * sigma_bound * h) / (r * r);
  out.vacuous = out.bound >= 1.0;
  out.passed = out.empirical.value <= out.bound + out.empirical.half_width;
  return out;
}

void write_paths_csv(std::ostream& os, const PathEnsemble& ens) {
  os << "path,exited,aborted,exit_time,max_distance,running_cost";
  for (std::size_t i = 0; i < ens.dim; ++i) os << ",x" << i;
  os << '\n' << std::setprecision(17);
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    os << p << ',' << int(ens.exited[p]) << ',' << int(ens.aborted[p]) << ',' << ens.exit_time[p] << ','
       << ens.max_distance[p] << ',' << ens.running_cost[p];
    for (std::size_t i = 0; i < ens.dim; ++i) os << ',' << ens.terminal[p * ens.dim + i];
    os << '\n';
  }
}

}  // namespace stochlyap
