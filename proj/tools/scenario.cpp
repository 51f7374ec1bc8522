#include "scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"
#include "stochlyap/digest.hpp"
#include "stochlyap/field_io.hpp"

namespace stochlyap::cli {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const auto m = at.Mark();
    std::ostringstream os;
    os << file_;
    if (!m.is_null()) os << ':' << (m.line + 1) << ':' << (m.column + 1);
    os << ": " << msg;
    throw ScenarioError(os.str());
  }

  void keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) const {
    if (!map.IsMap()) fail(map, where + " must be a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
    }
  }

  const YAML::Node need(const YAML::Node& map, const std::string& key, const std::string& where) const {
    const YAML::Node n = map[key];
    if (!n) fail(map, "missing '" + key + "' in " + where);
    return n;
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a number");
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) fail(n, what + " must be finite");
      return v;
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be a number, got '" + n.Scalar() + "'");
    }
  }

  double number_or(const YAML::Node& map, const std::string& key, double fallback) const {
    const YAML::Node n = map[key];
    return n ? number(n, key) : fallback;
  }

  double positive(const YAML::Node& map, const std::string& key, double fallback) const {
    const double v = number_or(map, key, fallback);
    if (!(v > 0.0)) fail(map[key] ? map[key] : map, key + " must be > 0");
    return v;
  }

  std::uint64_t count(const YAML::Node& n, const std::string& what) const {
    const double v = number(n, what);
    if (v < 0 || v != std::floor(v) || v > 1e15) fail(n, what + " must be a nonnegative integer");
    return static_cast<std::uint64_t>(v);
  }

  std::string text(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a string");
    return n.Scalar();
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(number(e, what));
    return out;
  }

  // Scalars in 1-D are one state each; otherwise each element is a state, or a
  // flat list is a single state.
  std::vector<std::vector<double>> states(const YAML::Node& n, std::size_t dim, const std::string& what) const {
    std::vector<std::vector<double>> out;
    if (n.IsScalar() && dim == 1) return {{number(n, what)}};
    if (!n.IsSequence() || n.size() == 0) fail(n, what + " must be a nonempty list of states");
    if (n[0].IsSequence()) {
      for (const auto& e : n) out.push_back(numbers(e, what));
    } else if (dim == 1) {
      for (const auto& e : n) out.push_back({number(e, what)});
    } else {
      out.push_back(numbers(n, what));
    }
    for (const auto& s : out) {
      if (s.size() != dim) fail(n, what + ": state of dimension " + std::to_string(s.size()) +
                                       ", expected " + std::to_string(dim));
    }
    return out;
  }

  const std::string& file() const { return file_; }

 private:
  std::string file_;
};

TargetSpec parse_target(const Reader& rd, const YAML::Node& n, std::size_t dim) {
  TargetSpec t;
  if (n.IsScalar()) {
    t.kind = rd.text(n, "target");
    if (t.kind != "origin") rd.fail(n, "target '" + t.kind + "' needs parameters");
    return t;
  }
  rd.keys(n, {"kind", "lower", "upper", "center", "radius"}, "target");
  t.kind = rd.text(rd.need(n, "kind", "target"), "target kind");
  if (t.kind == "origin") return t;
  if (t.kind == "box") {
    t.lower = rd.numbers(rd.need(n, "lower", "target"), "target lower");
    t.upper = rd.numbers(rd.need(n, "upper", "target"), "target upper");
    if (t.lower.size() != dim || t.upper.size() != dim) rd.fail(n, "target box has the wrong dimension");
    for (std::size_t i = 0; i < dim; ++i) {
      if (t.lower[i] > t.upper[i]) rd.fail(n, "target box needs lower <= upper");
    }
    return t;
  }
  if (t.kind == "ball") {
    t.center = rd.numbers(rd.need(n, "center", "target"), "target center");
    if (t.center.size() != dim) rd.fail(n, "target ball has the wrong dimension");
    t.radius = rd.number(rd.need(n, "radius", "target"), "target radius");
    if (t.radius < 0.0) rd.fail(n, "target radius must be >= 0");
    return t;
  }
  rd.fail(n["kind"], "unknown target kind '" + t.kind + "' (origin, box, ball)");
}

FunctionSpec parse_function(const Reader& rd, const YAML::Node& n, std::size_t dim,
                            const std::string& dir, const std::string& what) {
  FunctionSpec f;
  rd.keys(n, {"kind", "scale", "gamma", "value", "path", "target"}, what);
  f.kind = rd.text(rd.need(n, "kind", what), what + " kind");
  f.scale = rd.number_or(n, "scale", 1.0);
  if (f.kind == "zero") return f;
  if (f.kind == "constant") {
    f.value = rd.number(rd.need(n, "value", what), what + " value");
    return f;
  }
  if (f.kind == "power" || f.kind == "distance_power") {
    f.gamma = rd.positive(n, "gamma", 2.0);
    if (f.scale < 0.0) rd.fail(n, what + " scale must be >= 0");
    if (f.kind == "distance_power") f.target = parse_target(rd, rd.need(n, "target", what), dim);
    return f;
  }
  if (f.kind == "field") {
    const fs::path p = fs::path(dir) / rd.text(rd.need(n, "path", what), what + " path");
    if (!fs::exists(p)) rd.fail(n["path"], "field file '" + p.string() + "' does not exist");
    f.path = p.string();
    return f;
  }
  rd.fail(n["kind"], "unknown " + what + " kind '" + f.kind +
                         "' (zero, constant, power, distance_power, field)");
}

const std::set<std::string>& check_keys(const Reader& rd, const YAML::Node& at, const std::string& type) {
  static const std::map<std::string, std::set<std::string>> table = {
      {"lyapunov_stability", {"type", "k", "x0"}},
      {"lagrange_stability", {"type", "R", "S"}},
      {"asymptotic_stability", {"type", "k", "x0", "rho", "tail"}},
      {"supermartingale", {"type", "k", "x0", "n_se"}},
      {"representation", {"type", "x0", "rel_tol", "abs_tol", "policies"}},
      {"minimality", {"type", "grid_tol"}},
      {"subsolution_value", {"type", "x0", "rel_tol", "abs_tol"}},
      {"attractor", {"type", "target", "k", "x0", "n_se"}},
      {"small_intensity", {"type", "L", "table"}},
      {"radial_condition", {"type", "gamma"}},
      {"modulus_bound", {"type", "x0", "k", "t", "h", "r"}},
      {"occupation_time", {"type", "x0", "k", "r"}},
  };
  auto it = table.find(type);
  if (it == table.end()) {
    std::string names;
    for (const auto& [k, v] : table) names += (names.empty() ? "" : ", ") + k;
    rd.fail(at, "unknown check type '" + type + "' (" + names + ")");
  }
  return it->second;
}

CheckSpec parse_check(const Reader& rd, const YAML::Node& n, std::size_t dim, const std::string& dir) {
  if (!n.IsMap()) rd.fail(n, "each check must be a mapping");
  CheckSpec c;
  c.type = rd.text(rd.need(n, "type", "check"), "check type");
  rd.keys(n, check_keys(rd, n["type"], c.type), "check '" + c.type + "'");
  c.k = rd.positive(n, "k", 1.0);
  c.n_se = rd.positive(n, "n_se", 3.0);
  c.rel_tol = rd.number_or(n, "rel_tol", 0.03);
  c.abs_tol = rd.number_or(n, "abs_tol", 1e-12);
  c.grid_tol = rd.number_or(n, "grid_tol", 1e-6);
  if (c.rel_tol < 0.0 || c.abs_tol < 0.0 || c.grid_tol < 0.0) rd.fail(n, "tolerances must be >= 0");
  if (n["x0"]) c.x0 = rd.states(n["x0"], dim, "x0");
  if (c.type == "lagrange_stability") {
    c.radius = rd.positive(n, "R", 1.0);
    c.s_list = rd.numbers(rd.need(n, "S", "check"), "S");
    if (c.s_list.empty()) rd.fail(n["S"], "S must list at least one radius");
  }
  if (c.type == "asymptotic_stability") {
    c.rho = rd.positive(n, "rho", 0.05);
    c.tail = rd.positive(n, "tail", 1.0);
  }
  if (c.type == "representation" && n["policies"]) {
    for (const auto& p : n["policies"]) c.policies.push_back(rd.count(p, "policy index"));
  }
  if (c.type == "attractor") c.target = parse_target(rd, rd.need(n, "target", "check"), dim);
  if (c.type == "small_intensity") {
    c.big_l = parse_function(rd, rd.need(n, "L", "check"), dim, dir, "L");
    const YAML::Node t = rd.need(n, "table", "check");
    if (!t.IsSequence() || t.size() == 0) rd.fail(t, "table must list {delta, C} entries");
    for (const auto& e : t) {
      rd.keys(e, {"delta", "C"}, "table entry");
      IntensityEntry ie{rd.number(rd.need(e, "delta", "table entry"), "delta"),
                        rd.number(rd.need(e, "C", "table entry"), "C")};
      if (ie.delta < 0.0 || !(ie.c_delta > 0.0)) rd.fail(e, "need delta >= 0 and C > 0");
      c.table.push_back(ie);
    }
  }
  if (c.type == "radial_condition") {
    c.gamma = rd.number_or(n, "gamma", 2.0);
    if (!(c.gamma > 0.0 && c.gamma <= 2.0)) rd.fail(n["gamma"] ? n["gamma"] : n, "gamma must lie in (0, 2]");
  }
  if (c.type == "modulus_bound") {
    c.t = rd.number_or(n, "t", 1.0);
    c.h = rd.positive(n, "h", 0.1);
    c.radius = rd.positive(n, "r", 0.5);
    if (c.t < 0.0) rd.fail(n["t"], "t must be >= 0");
  }
  if (c.type == "occupation_time") c.radius = rd.positive(n, "r", 0.5);
  const std::set<std::string> needs_x0 = {"lyapunov_stability", "asymptotic_stability", "supermartingale",
                                          "representation", "subsolution_value", "attractor",
                                          "modulus_bound", "occupation_time"};
  if (needs_x0.count(c.type) && c.x0.empty()) rd.fail(n, "check '" + c.type + "' needs x0");
  return c;
}

// nlohmann gives a byte offset; turn it into line:column.
[[noreturn]] void json_error(const std::string& path, const std::string& text, std::size_t offset,
                             const std::string& msg) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  throw ScenarioError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> stages = {"validate", "solve", "verify", "simulate", "analyze"};
  return stages;
}

Scenario load_scenario(const std::string& path) {
  const std::string text = read_file(path);
  if (fs::path(path).extension() == ".json") {
    try {
      const auto doc = nlohmann::json::parse(text);
      (void)doc;
    } catch (const nlohmann::json::parse_error& e) {
      json_error(path, text, e.byte > 0 ? e.byte - 1 : 0, "invalid JSON");
    }
  }
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(path + ":" + std::to_string(e.mark.line + 1) + ":" +
                        std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  const Reader rd(path);
  Scenario s;
  s.path = path;
  s.directory = fs::absolute(path).parent_path().string();
  s.digest = hex_digest(text);
  if (!root || !root.IsMap()) rd.fail(root, "scenario must be a mapping");
  rd.keys(root, {"name", "seed", "output", "dynamics", "controls", "grid", "scheme", "candidate", "cost",
                 "flavor", "sim", "tolerances", "infinite_horizon", "stages", "checks"},
          "scenario");
  s.name = root["name"] ? rd.text(root["name"], "name") : fs::path(path).stem().string();

  const YAML::Node dyn = rd.need(root, "dynamics", "scenario");
  rd.keys(dyn, {"model", "params"}, "dynamics");
  s.model = rd.text(rd.need(dyn, "model", "dynamics"), "model");
  if (dyn["params"]) {
    if (!dyn["params"].IsMap()) rd.fail(dyn["params"], "params must be a mapping");
    for (const auto& kv : dyn["params"]) s.params[kv.first.as<std::string>()] = rd.number(kv.second, kv.first.as<std::string>());
  }
  Dynamics d;
  try {
    d = make_dynamics(s.model, s.params);
  } catch (const std::invalid_argument& e) {
    rd.fail(dyn, e.what());
  }

  const YAML::Node grid = rd.need(root, "grid", "scenario");
  rd.keys(grid, {"lower", "upper", "cells"}, "grid");
  s.lower = rd.numbers(rd.need(grid, "lower", "grid"), "grid lower");
  s.upper = rd.numbers(rd.need(grid, "upper", "grid"), "grid upper");
  for (const auto& c : rd.need(grid, "cells", "grid")) s.cells.push_back(rd.count(c, "cells"));
  if (s.lower.size() != d.dim_state || s.upper.size() != d.dim_state || s.cells.size() != d.dim_state) {
    rd.fail(grid, "grid must have " + std::to_string(d.dim_state) + " entries per field for model '" + s.model + "'");
  }
  try {
    Grid check(s.lower, s.upper, s.cells);
  } catch (const std::invalid_argument& e) {
    rd.fail(grid, e.what());
  }
  const std::size_t dim = d.dim_state;

  if (root["controls"]) {
    const YAML::Node c = root["controls"];
    if (!c.IsSequence() || c.size() == 0) rd.fail(c, "controls must be a nonempty list");
    std::vector<double> flat;
    std::size_t cdim = 1;
    if (c[0].IsSequence()) {
      cdim = c[0].size();
      for (const auto& p : c) {
        auto v = rd.numbers(p, "control point");
        if (v.size() != cdim) rd.fail(p, "control points must share one dimension");
        flat.insert(flat.end(), v.begin(), v.end());
      }
    } else {
      flat = rd.numbers(c, "controls");
    }
    if (cdim != d.dim_control) rd.fail(c, "control dimension must be " + std::to_string(d.dim_control));
    try {
      s.controls = ControlSet(cdim, flat, "scenario controls");
    } catch (const std::invalid_argument& e) {
      rd.fail(c, e.what());
    }
  }

  if (root["scheme"]) {
    const auto sch = rd.text(root["scheme"], "scheme");
    if (sch == "upwind") s.scheme = DriftScheme::Upwind;
    else if (sch == "central-where-monotone") s.scheme = DriftScheme::CentralWhereMonotone;
    else rd.fail(root["scheme"], "scheme must be 'upwind' or 'central-where-monotone'");
  }
  if (root["candidate"]) s.candidate = parse_function(rd, root["candidate"], dim, s.directory, "candidate");
  if (root["cost"]) s.cost = parse_function(rd, root["cost"], dim, s.directory, "cost");
  if (root["flavor"]) {
    const auto f = rd.text(root["flavor"], "flavor");
    if (f == "local") s.flavor = Flavor::Local;
    else if (f == "local-strict") s.flavor = Flavor::LocalStrict;
    else if (f == "global-strict") s.flavor = Flavor::GlobalStrict;
    else if (f == "m-variant") s.flavor = Flavor::MVariant;
    else rd.fail(root["flavor"], "flavor must be local, local-strict, global-strict or m-variant");
  }

  s.sim.seed = root["seed"] ? rd.count(root["seed"], "seed") : 0;
  if (root["sim"]) {
    const YAML::Node sim = root["sim"];
    rd.keys(sim, {"dt", "horizon", "paths", "report_interval", "x0"}, "sim");
    s.sim.dt = rd.positive(sim, "dt", 1e-3);
    s.sim.horizon = rd.positive(sim, "horizon", 1.0);
    if (s.sim.horizon < s.sim.dt) rd.fail(sim, "horizon must be >= dt");
    if (sim["paths"]) {
      s.sim.n_paths = rd.count(sim["paths"], "paths");
      if (s.sim.n_paths == 0) rd.fail(sim["paths"], "paths must be >= 1");
    }
    s.sim.report_interval = rd.number_or(sim, "report_interval", 0.0);
    if (s.sim.report_interval < 0.0) rd.fail(sim["report_interval"], "report_interval must be >= 0");
    if (sim["x0"]) {
      const auto st = rd.states(sim["x0"], dim, "sim x0");
      s.sim.x0 = st.front();
    }
  }
  if (s.sim.x0.empty()) s.sim.x0.assign(dim, 0.0);

  if (root["tolerances"]) {
    rd.keys(root["tolerances"], {"supersolution"}, "tolerances");
    s.supersolution_tol = rd.positive(root["tolerances"], "supersolution", 1e-8);
  }
  if (root["infinite_horizon"]) {
    const YAML::Node ih = root["infinite_horizon"];
    rd.keys(ih, {"lambda_start", "lambda_factor", "lambda_min", "tol", "divergence_cap"}, "infinite_horizon");
    s.infinite_horizon.lambda_start = rd.positive(ih, "lambda_start", 1.0);
    s.infinite_horizon.lambda_factor = rd.positive(ih, "lambda_factor", 0.1);
    s.infinite_horizon.lambda_min = rd.positive(ih, "lambda_min", 1e-10);
    s.infinite_horizon.tol = rd.positive(ih, "tol", 1e-8);
    s.infinite_horizon.divergence_cap = rd.positive(ih, "divergence_cap", 1e10);
    if (s.infinite_horizon.lambda_factor >= 1.0) rd.fail(ih, "lambda_factor must be < 1");
  }

  if (root["stages"]) {
    const YAML::Node st = root["stages"];
    if (!st.IsSequence()) rd.fail(st, "stages must be a list");
    for (const auto& e : st) {
      const auto name = rd.text(e, "stage");
      if (std::find(all_stages().begin(), all_stages().end(), name) == all_stages().end()) {
        rd.fail(e, "unknown stage '" + name + "' (validate, solve, verify, simulate, analyze)");
      }
      if (std::find(s.stages.begin(), s.stages.end(), name) != s.stages.end()) rd.fail(e, "duplicate stage '" + name + "'");
      s.stages.push_back(name);
    }
    // Dependency order regardless of how they were listed.
    std::vector<std::string> ordered;
    for (const auto& name : all_stages()) {
      if (std::find(s.stages.begin(), s.stages.end(), name) != s.stages.end()) ordered.push_back(name);
    }
    s.stages = ordered;
  } else {
    s.stages = all_stages();
  }

  if (root["checks"]) {
    const YAML::Node ch = root["checks"];
    if (!ch.IsSequence()) rd.fail(ch, "checks must be a list");
    for (const auto& c : ch) s.checks.push_back(parse_check(rd, c, dim, s.directory));
  }
  // Nothing to analyze without checks.
  if (s.checks.empty()) std::erase(s.stages, std::string("analyze"));
  const bool needs_candidate =
      std::any_of(s.stages.begin(), s.stages.end(), [](const std::string& st) { return st == "verify" || st == "simulate"; }) ||
      std::any_of(s.checks.begin(), s.checks.end(), [](const CheckSpec& c) {
        return c.type != "small_intensity" && c.type != "radial_condition";
      });
  if (needs_candidate && !s.candidate) rd.fail(root, "this scenario needs a 'candidate'");
  if (std::find(s.stages.begin(), s.stages.end(), "solve") != s.stages.end() && !s.cost) {
    rd.fail(root, "stage 'solve' needs a 'cost'");
  }

  const std::string out = root["output"] ? rd.text(root["output"], "output") : "out/" + s.name;
  s.output = (fs::path(s.directory) / out).lexically_normal().string();
  return s;
}

ScalarFn make_function(const FunctionSpec& spec) {
  const double scale = spec.scale;
  if (spec.kind == "zero") return [](std::span<const double>) { return 0.0; };
  if (spec.kind == "constant") {
    const double v = spec.value;
    return [v](std::span<const double>) { return v; };
  }
  if (spec.kind == "power" || spec.kind == "distance_power") {
    const double gamma = spec.gamma;
    const DistanceFn d = spec.kind == "power" ? DistanceFn() : make_distance(spec.target);
    return [scale, gamma, d](std::span<const double> x) {
      double r2;
      if (d) {
        const double r = d(x);
        r2 = r * r;
      } else {
        r2 = 0.0;
        for (double v : x) r2 += v * v;
      }
      // Exact squares for the common gamma = 2 case.
      return gamma == 2.0 ? scale * r2 : scale * std::pow(std::sqrt(r2), gamma);
    };
  }
  if (spec.kind == "field") {
    auto field = std::make_shared<ScalarField>(load_field(spec.path));
    return [field](std::span<const double> x) { return field->interpolate(x); };
  }
  throw std::invalid_argument("unknown function kind '" + spec.kind + "'");
}

DistanceFn make_distance(const TargetSpec& spec) {
  if (spec.kind == "origin") return [](std::span<const double> x) { return euclidean_norm(x); };
  if (spec.kind == "box") {
    const auto lo = spec.lower, hi = spec.upper;
    return [lo, hi](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = std::max({lo[i] - x[i], 0.0, x[i] - hi[i]});
        s += e * e;
      }
      return std::sqrt(s);
    };
  }
  if (spec.kind == "ball") {
    const auto c = spec.center;
    const double r = spec.radius;
    return [c, r](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
      return std::max(0.0, std::sqrt(s) - r);
    };
  }
  throw std::invalid_argument("unknown target kind '" + spec.kind + "'");
}

}  // namespace stochlyap::cli
