#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochlyap/analysis.hpp"
#include "stochlyap/catalog.hpp"

namespace stochlyap::cli {

/// Parse or validation problem; what() carries "file:line:col: message".
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TargetSpec {
  std::string kind = "origin";  ///< origin | box | ball
  std::vector<double> lower, upper, center;
  double radius = 0.0;
};

/// Closed-form scalar function of the state, or a field file.
struct FunctionSpec {
  std::string kind = "zero";  ///< zero | constant | power | distance_power | field
  double scale = 1.0;
  double gamma = 2.0;
  double value = 0.0;
  std::string path;  ///< resolved against the scenario directory
  TargetSpec target;
};

struct CheckSpec {
  std::string type;
  double k = 1.0;
  double radius = 1.0;  ///< R for lagrange, r for occupation/modulus
  std::vector<double> s_list;
  std::vector<std::vector<double>> x0;
  double rho = 0.05;
  double tail = 1.0;
  double t = 1.0;
  double h = 0.1;
  double rel_tol = 0.03;
  double abs_tol = 1e-12;
  double grid_tol = 1e-6;
  double n_se = 3.0;
  double gamma = 2.0;
  std::vector<std::size_t> policies;
  std::optional<TargetSpec> target;
  std::vector<IntensityEntry> table;
  std::optional<FunctionSpec> big_l;
};

struct Scenario {
  std::string path;
  std::string directory;
  std::string digest;  ///< content hash of the scenario file
  std::string name;

  std::string model;
  ParameterMap params;
  std::optional<ControlSet> controls;

  std::vector<double> lower, upper;
  std::vector<std::size_t> cells;
  DriftScheme scheme = DriftScheme::CentralWhereMonotone;

  std::optional<FunctionSpec> candidate;
  std::optional<FunctionSpec> cost;
  Flavor flavor = Flavor::LocalStrict;

  SimConfig sim;
  double supersolution_tol = 1e-8;
  InfiniteHorizonOptions infinite_horizon;

  std::vector<std::string> stages;
  std::vector<CheckSpec> checks;
  std::string output;  ///< resolved output directory
};

/// YAML, or JSON (validated strictly first) when the file ends in .json.
Scenario load_scenario(const std::string& path);

/// Field specs load their file here.
ScalarFn make_function(const FunctionSpec& spec);
DistanceFn make_distance(const TargetSpec& spec);

/// Canonical stage order.
const std::vector<std::string>& all_stages();

}  // namespace stochlyap::cli
