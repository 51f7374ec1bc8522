#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace stochlyap::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kParseError = 2, kSolverFailure = 3 };

struct RunOptions {
  std::optional<std::string> output;  ///< overrides the scenario's output directory
  std::size_t workers = 1;
};

struct RunResult {
  int exit_code = kOk;
  std::vector<std::string> failing_checks;
  std::vector<std::string> artifacts;  ///< relative to the output directory
  std::string output;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options, std::ostream& log);

/// Resolved plan; runs nothing.
void describe(const Scenario& scenario, std::ostream& os);

}  // namespace stochlyap::cli
