#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "stochlyap/catalog.hpp"
#include "stochlyap/digest.hpp"
#include "stochlyap/field_io.hpp"
#include "stochlyap/report.hpp"
#include "stochlyap/version.hpp"

namespace stochlyap::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json numbers(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string describe_function(const FunctionSpec& f) {
  if (f.kind == "zero") return "0";
  if (f.kind == "constant") return fmt(f.value);
  const std::string scale = f.scale == 1.0 ? "" : fmt(f.scale) + " ";
  if (f.kind == "power") return scale + "|x|^" + fmt(f.gamma);
  if (f.kind == "distance_power") return scale + "d(x, " + f.target.kind + ")^" + fmt(f.gamma);
  return "field " + fs::path(f.path).filename().string();
}

std::string describe_target(const TargetSpec& t) {
  if (t.kind == "origin") return "origin";
  std::ostringstream os;
  if (t.kind == "box") {
    os << "box";
    for (std::size_t i = 0; i < t.lower.size(); ++i) os << (i ? " x " : " ") << '[' << t.lower[i] << ", " << t.upper[i] << ']';
  } else {
    os << "ball r=" << t.radius << " at (";
    for (std::size_t i = 0; i < t.center.size(); ++i) os << (i ? ", " : "") << t.center[i];
    os << ')';
  }
  return os.str();
}

const char* flavor_name(Flavor f) {
  switch (f) {
    case Flavor::Local:
      return "local";
    case Flavor::LocalStrict:
      return "local-strict";
    case Flavor::GlobalStrict:
      return "global-strict";
    case Flavor::MVariant:
      return "m-variant";
  }
  return "unknown";
}

// Writes files under the output directory and remembers their digests.
class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  void write(const std::string& rel, const std::string& bytes) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out) throw std::runtime_error("cannot write " + p.string());
    entries_.emplace_back(rel, hex_digest(bytes), bytes.size());
  }
  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  json manifest() const {
    json a = json::array();
    for (const auto& [rel, digest, size] : entries_) {
      a.push_back({{"path", rel}, {"digest", digest}, {"bytes", size}});
    }
    return a;
  }
  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(std::get<0>(e));
    return out;
  }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<std::tuple<std::string, std::string, std::size_t>> entries_;
};

std::string field_csv(const ScalarField& f) {
  std::ostringstream os;
  write_field_csv(os, f);
  return os.str();
}

std::string policy_csv(const FeedbackPolicy& p) {
  std::ostringstream os;
  write_policy_csv(os, p);
  return os.str();
}

// One row per node: coordinates, then the named columns.
std::string node_table(const Grid& grid, const std::vector<std::pair<std::string, std::vector<double>>>& cols) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < grid.dim(); ++i) os << (i ? "," : "") << 'x' << i;
  for (const auto& c : cols) os << ',' << c.first;
  os << '\n';
  std::vector<double> x(grid.dim());
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    grid.coordinate(node, x);
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    for (const auto& c : cols) os << ',' << c.second[node];
    os << '\n';
  }
  return os.str();
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }
std::vector<double> as_vector(const FeedbackPolicy& p) { return {p.indices().begin(), p.indices().end()}; }

ControlSet resolve_controls(const Scenario& s) {
  return s.controls ? *s.controls : default_controls(s.model, s.params);
}

struct Context {
  const Scenario& s;
  Dynamics dyn;
  ControlSet controls;
  Grid grid;
  HamiltonianParams hp;
  DiscreteOperator op;
  ScalarField l;
  std::optional<ScalarField> v;
  std::optional<ScalarField> v_inf;
  std::vector<CheckReport> reports;

  Context(const Scenario& sc, std::size_t workers)
      : s(sc),
        dyn(make_dynamics(sc.model, sc.params)),
        controls(resolve_controls(sc)),
        grid(sc.lower, sc.upper, sc.cells),
        hp{sc.scheme, CrossDerivativeRule::SignSplit, workers},
        op(dyn, grid, controls, hp),
        l(sc.cost ? ScalarField::sample(grid, make_function(*sc.cost)) : ScalarField(grid, 0.0)) {
    if (sc.candidate) v = ScalarField::sample(grid, make_function(*sc.candidate));
  }

  LyapunovCandidate candidate() const {
    LyapunovCandidate c;
    c.value = make_function(*s.candidate);
    if (s.cost) c.cost = make_function(*s.cost);
    c.flavor = s.flavor;
    c.description = "V = " + describe_function(*s.candidate) + ", l = " + (s.cost ? describe_function(*s.cost) : "0");
    return c;
  }

  CheckSetup setup() const {
    SimConfig sim = s.sim;
    sim.workers = hp.workers;
    return {dyn, controls, grid, hp, sim, s.supersolution_tol, s.digest};
  }
};

void stage_validate(Context& ctx, Artifacts& art) {
  json j;
  j["scenario"] = ctx.s.name;
  j["scenario_digest"] = ctx.s.digest;
  j["model"] = ctx.s.model;
  json p = json::object();
  for (const auto& [k, v] : ctx.s.params) p[k] = number(v);
  j["params"] = p;
  j["dim_state"] = ctx.dyn.dim_state;
  j["dim_noise"] = ctx.dyn.dim_noise;
  j["dim_control"] = ctx.dyn.dim_control;
  j["controls"] = ctx.controls.size();
  j["grid"] = {{"lower", numbers(ctx.grid.lower())},
               {"upper", numbers(ctx.grid.upper())},
               {"cells", std::vector<std::size_t>(ctx.grid.cells().begin(), ctx.grid.cells().end())},
               {"nodes", ctx.grid.node_count()}};
  j["scheme"] = to_string(ctx.hp.drift_scheme);
  j["stencil"] = ctx.op.stencil_size();
  j["positivity_violations"] = ctx.op.flagged_nodes().size();
  art.write_json("validate.json", j);
}

// Returns false on solver non-convergence.
bool stage_solve(Context& ctx, Artifacts& art, std::ostream& log) {
  InfiniteHorizonOptions opts = ctx.s.infinite_horizon;
  const auto res = solve_infinite_horizon(ctx.l, ctx.op, opts);
  json j;
  j["converged"] = res.converged;
  j["diverged"] = res.diverged;
  j["message"] = res.message;
  j["lambda_reached"] = number(res.lambda_reached);
  j["lambdas"] = numbers(res.lambdas);
  j["successive_differences"] = numbers(res.successive_differences);
  json solves = json::array();
  bool inner_ok = true;
  for (const auto& r : res.reports) {
    solves.push_back({{"method", r.method},
                      {"iterations", r.iterations},
                      {"residual", number(r.residual)},
                      {"converged", r.converged}});
    inner_ok = inner_ok && r.converged;
  }
  j["solves"] = solves;
  art.write_json("solve.json", j);
  art.write("fields/v_inf.csv", field_csv(res.value));
  art.write("fields/policy_inf.csv", policy_csv(res.policy));
  ctx.v_inf = res.value;
  if (res.diverged) {
    log << "  V_inf diverged: " << res.message << '\n';
    return inner_ok;
  }
  if (!res.converged) log << "  V_inf did not converge: " << res.message << '\n';
  return inner_ok && res.converged;
}

void stage_verify(Context& ctx, Artifacts& art) {
  const auto sup = verify_supersolution(*ctx.v, ctx.l, ctx.op, ctx.s.supersolution_tol);
  CheckReport r;
  r.check_name = "supersolution";
  r.config_digest = ctx.s.digest;
  r.seed = ctx.s.sim.seed;
  r.add("min_residual", sup.min_residual, sup.tol, "grid");
  r.add("failing_nodes", static_cast<double>(sup.failing_nodes.size()), 0.0, "grid");
  r.add("positivity_violations", static_cast<double>(ctx.op.flagged_nodes().size()), 0.0, "grid");
  r.verdict = sup.all_passed ? Verdict::Pass : Verdict::Fail;
  if (!sup.all_passed) {
    std::vector<double> x(ctx.grid.dim());
    ctx.grid.coordinate(sup.failing_nodes.front(), x);
    std::string where;
    for (std::size_t i = 0; i < x.size(); ++i) where += (i ? ", " : "") + fmt(x[i]);
    r.notes.push_back("H(V) < l at " + std::to_string(sup.failing_nodes.size()) + " nodes, first at (" + where + ")");
  }
  const auto policy = extract_policy(*ctx.v, ctx.op);
  art.write_json("verify.json", json::parse(to_json(r)));
  art.write("fields/candidate.csv", field_csv(*ctx.v));
  art.write("fields/residual.csv", field_csv(sup.residual));
  art.write("fields/policy.csv", policy_csv(policy));

  std::vector<std::pair<std::string, std::vector<double>>> cols = {
      {"V", as_vector(ctx.v->values())},
      {"l", as_vector(ctx.l.values())},
      {"residual", as_vector(sup.residual.values())},
      {"control", as_vector(policy)}};
  if (ctx.v_inf) cols.emplace_back("V_inf", as_vector(ctx.v_inf->values()));
  art.write("slices/nodes.csv", node_table(ctx.grid, cols));
  ctx.reports.push_back(std::move(r));
}

void stage_simulate(Context& ctx, Artifacts& art) {
  const auto cand = ctx.candidate();
  SimConfig cfg = ctx.setup().sim;
  cfg.domain = Box{as_vector(ctx.grid.lower()), as_vector(ctx.grid.upper())};
  const auto law = ControlLaw::feedback(ctx.controls, extract_policy(*ctx.v, ctx.op));
  Observables obs;
  obs.value = cand.value;
  obs.cost = cand.cost;
  const auto ens = simulate_paths(ctx.dyn, law, cfg, obs);
  const auto pay = payoff_functional(ens);

  std::ostringstream curve;
  curve << std::setprecision(17) << "t,payoff,std_error,lower,upper\n";
  for (std::size_t j = 0; j < pay.times.size(); ++j) {
    const auto& e = pay.series[j];
    curve << pay.times[j] << ',' << e.value << ',' << e.std_error << ',' << e.lower << ',' << e.upper << '\n';
  }
  art.write("curves/payoff.csv", curve.str());
  std::ostringstream paths;
  write_paths_csv(paths, ens);
  art.write("paths.csv", paths.str());

  std::size_t exited = 0;
  for (auto e : ens.exited) exited += e;
  json j;
  j["x0"] = numbers(cfg.x0);
  j["control_law"] = law.description();
  j["paths"] = ens.n_paths();
  j["steps"] = ens.steps;
  j["dt"] = number(ens.dt);
  j["exited_box"] = exited;
  j["aborted"] = ens.aborted_count();
  j["payoff_t0"] = number(pay.series.front().value);
  j["payoff_T"] = number(pay.series.back().value);
  j["payoff_sup"] = number(pay.sup.value);
  j["payoff_sup_time"] = number(pay.argmax_time);
  art.write_json("simulate.json", j);
}

CheckReport run_check(const CheckSpec& c, const Context& ctx) {
  const CheckSetup setup = ctx.setup();
  const auto cand = [&] { return ctx.candidate(); };
  CheckReport r;
  if (c.type == "lyapunov_stability") {
    r = lyapunov_stability_check(setup, cand(), c.k, c.x0);
  } else if (c.type == "lagrange_stability") {
    r = lagrange_stability_check(setup, cand(), c.radius, c.s_list);
  } else if (c.type == "asymptotic_stability") {
    r = asymptotic_stability_check(setup, cand(), c.k, c.x0, c.rho, c.tail);
  } else if (c.type == "supermartingale") {
    r = supermartingale_check(setup, cand(), c.k, c.x0.front(), c.n_se);
  } else if (c.type == "representation") {
    RepresentationOptions o;
    o.rel_tol = c.rel_tol;
    o.abs_tol = c.abs_tol;
    o.constant_policies = c.policies;
    r = representation_check(setup, cand(), c.x0, o);
  } else if (c.type == "minimality") {
    MinimalityOptions o;
    o.grid_tol = c.grid_tol;
    o.solve = ctx.s.infinite_horizon;
    r = minimality_check(setup, *ctx.v, ctx.l, o);
  } else if (c.type == "subsolution_value") {
    r = subsolution_value_check(setup, cand(), c.x0, c.rel_tol, c.abs_tol);
  } else if (c.type == "attractor") {
    const TargetSet target{make_distance(*c.target), 1e-12, describe_target(*c.target)};
    r = attractor_check(setup, cand(), target, c.k, c.x0, c.n_se);
  } else if (c.type == "small_intensity") {
    r = small_intensity_check(make_function(*c.big_l), c.table, ctx.dyn, ctx.controls, ctx.grid);
  } else if (c.type == "radial_condition") {
    r = radial_condition_check(c.gamma, ctx.dyn, ctx.controls, ctx.grid);
  } else if (c.type == "modulus_bound") {
    r = modulus_bound_check(setup, cand(), c.k, c.x0, c.t, c.h, c.radius);
  } else if (c.type == "occupation_time") {
    r = occupation_time_check(setup, cand(), c.k, c.x0, c.radius);
  } else {
    throw std::invalid_argument("unknown check type '" + c.type + "'");
  }
  r.config_digest = ctx.s.digest;
  r.seed = ctx.s.sim.seed;
  return r;
}

void stage_analyze(Context& ctx, Artifacts& art, std::ostream& log) {
  std::ostringstream table;
  table << std::setprecision(17) << "check,quantity,value,tolerance,provenance\n";
  for (std::size_t i = 0; i < ctx.s.checks.size(); ++i) {
    const auto& spec = ctx.s.checks[i];
    log << "  check " << spec.type << " ..." << std::flush;
    CheckReport r = run_check(spec, ctx);
    log << ' ' << to_string(r.verdict) << '\n';
    std::ostringstream name;
    name << "checks/" << std::setw(2) << std::setfill('0') << (i + 1) << '-' << spec.type << ".json";
    art.write(name.str(), to_json(r) + "\n");
    for (const auto& e : r.evidence) {
      table << r.check_name << ",\"" << e.quantity << "\"," << e.value << ',' << e.tolerance << ','
            << e.provenance << '\n';
    }
    ctx.reports.push_back(std::move(r));
  }
  art.write("curves/evidence.csv", table.str());
}

bool has_stage(const Scenario& s, const std::string& name) {
  return std::find(s.stages.begin(), s.stages.end(), name) != s.stages.end();
}

}  // namespace

RunResult run_scenario(const Scenario& s, const RunOptions& options, std::ostream& log) {
  RunResult out;
  out.output = options.output ? *options.output : s.output;
  Artifacts art(out.output);
  log << "scenario " << s.name << " (" << s.digest << ")\n";

  Context ctx(s, options.workers);
  bool solver_ok = true;
  json stages = json::array();
  for (const auto& stage : s.stages) {
    log << "stage " << stage << '\n';
    if (stage == "validate") {
      stage_validate(ctx, art);
    } else if (stage == "solve") {
      try {
        solver_ok = stage_solve(ctx, art, log);
      } catch (const std::runtime_error& e) {
        log << "  solver error: " << e.what() << '\n';
        solver_ok = false;
      }
    } else if (stage == "verify") {
      stage_verify(ctx, art);
    } else if (stage == "simulate") {
      stage_simulate(ctx, art);
    } else if (stage == "analyze") {
      stage_analyze(ctx, art, log);
    }
    stages.push_back(stage);
    if (!solver_ok) break;
  }

  json verdicts = json::array();
  for (const auto& r : ctx.reports) {
    verdicts.push_back({{"check", r.check_name}, {"verdict", to_string(r.verdict)}});
    if (r.verdict == Verdict::Fail || r.verdict == Verdict::Indeterminate) out.failing_checks.push_back(r.check_name);
  }
  if (!solver_ok) out.exit_code = kSolverFailure;
  else if (!out.failing_checks.empty()) out.exit_code = kCheckFailed;

  if (!ctx.reports.empty()) art.write("reports.json", to_json(ctx.reports) + "\n");
  json summary;
  summary["scenario"] = s.name;
  summary["scenario_digest"] = s.digest;
  summary["seed"] = s.sim.seed;
  summary["stages"] = stages;
  summary["checks"] = verdicts;
  summary["failing"] = out.failing_checks;
  summary["exit_code"] = out.exit_code;
  art.write_json("summary.json", summary);

  json manifest;
  manifest["tool"] = "stochlyap";
  manifest["version"] = kVersion;
  manifest["scenario"] = fs::path(s.path).filename().string();
  manifest["scenario_digest"] = s.digest;
  manifest["artifacts"] = art.manifest();
  out.artifacts = art.paths();
  art.write_json("manifest.json", manifest);
  out.artifacts.push_back("manifest.json");
  return out;
}

void describe(const Scenario& s, std::ostream& os) {
  const Dynamics dyn = make_dynamics(s.model, s.params);
  const ControlSet controls = resolve_controls(s);
  const Grid grid(s.lower, s.upper, s.cells);
  const std::size_t n = grid.dim();
  const std::size_t stencil = 2 * n + 2 * n * (n - 1);
  const std::size_t nodes = grid.node_count();
  const std::size_t steps = static_cast<std::size_t>(std::llround(s.sim.horizon / s.sim.dt));
  const std::size_t reports =
      s.sim.report_interval > 0 ? static_cast<std::size_t>(s.sim.horizon / s.sim.report_interval) + 2 : 2;

  os << "scenario   " << s.name << "  (digest " << s.digest << ")\n";
  os << "model      " << s.model;
  for (const auto& [k, v] : s.params) os << ' ' << k << '=' << v;
  os << "  (state " << dyn.dim_state << ", noise " << dyn.dim_noise << ", control " << dyn.dim_control << ")\n";
  os << "grid       " << nodes << " nodes";
  for (std::size_t i = 0; i < n; ++i) os << (i ? " x " : "  ") << '[' << s.lower[i] << ", " << s.upper[i] << "]/" << s.cells[i];
  os << '\n';
  os << "controls   " << controls.size() << (s.controls ? " (scenario)" : " (catalog default)") << '\n';
  os << "scheme     " << to_string(s.scheme) << '\n';
  if (s.candidate) os << "candidate  V = " << describe_function(*s.candidate) << "  [" << flavor_name(s.flavor) << "]\n";
  if (s.cost) os << "cost       l = " << describe_function(*s.cost) << '\n';
  os << "stages     " << s.stages.size() << '\n';
  for (const auto& st : s.stages) {
    os << "  " << std::left << std::setw(10) << st << std::right;
    if (st == "validate") os << "build the operator: " << nodes << " nodes x " << controls.size() << " controls x " << stencil << " neighbours";
    if (st == "solve") {
      const auto& ih = s.infinite_horizon;
      os << "V_inf by vanishing discount, lambda " << ih.lambda_start << " -> " << ih.lambda_min << " (x" << ih.lambda_factor << ')';
    }
    if (st == "verify") os << "discrete supersolution test, tol " << s.supersolution_tol;
    if (st == "simulate") os << s.sim.n_paths << " paths x " << steps << " steps from x0, dt " << s.sim.dt;
    if (st == "analyze") os << s.checks.size() << " checks";
    os << '\n';
  }
  if (!has_stage(s, "analyze")) os << "analysis   0 stages\n";
  for (std::size_t i = 0; i < s.checks.size(); ++i) {
    const auto& c = s.checks[i];
    os << "  " << (i + 1) << ". " << c.type;
    if (!c.x0.empty()) os << "  (" << c.x0.size() << " starting point" << (c.x0.size() == 1 ? "" : "s") << ')';
    os << '\n';
  }
  const double op_bytes = static_cast<double>(nodes) * controls.size() * (stencil + 1) * 8.0;
  const double lu_bytes = static_cast<double>(nodes) * (stencil + 1) * 12.0 * 4.0;
  const double ens_bytes = static_cast<double>(s.sim.n_paths) * (2.0 * reports + n + 8.0) * 8.0;
  os << "memory     ~" << std::fixed << std::setprecision(1)
     << (op_bytes + lu_bytes + ens_bytes) / (1024.0 * 1024.0) << " MiB (operator "
     << op_bytes / (1024.0 * 1024.0) << ", solver " << lu_bytes / (1024.0 * 1024.0) << ", ensemble "
     << ens_bytes / (1024.0 * 1024.0) << ")\n"
     << std::defaultfloat;
  os << "output     " << s.output << '\n';
}

}  // namespace stochlyap::cli
