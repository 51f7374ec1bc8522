#include <CLI11.hpp>

#include <iostream>

#include "pipeline.hpp"
#include "stochlyap/parallel.hpp"
#include "stochlyap/version.hpp"

using namespace stochlyap::cli;

int main(int argc, char** argv) {
  CLI::App app{"stochlyap: stochastic Lyapunov function verification"};
  app.require_subcommand(1);

  std::string run_path, describe_path, output;
  auto* run = app.add_subcommand("run", "run a scenario and write reports");
  run->add_option("scenario", run_path, "scenario file (.yaml or .json)")->required();
  run->add_option("-o,--output", output, "output directory (default: from the scenario)");
  auto* desc = app.add_subcommand("describe", "print the resolved plan without running it");
  desc->add_option("scenario", describe_path, "scenario file")->required();
  auto* ver = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kParseError;
  }

  if (ver->parsed()) {
    std::cout << "stochlyap " << stochlyap::kVersion << '\n';
    return kOk;
  }

  try {
    if (desc->parsed()) {
      describe(load_scenario(describe_path), std::cout);
      return kOk;
    }
    const Scenario s = load_scenario(run_path);
    RunOptions opts;
    if (!output.empty()) opts.output = output;
    opts.workers = stochlyap::workers_from_env();
    const RunResult r = run_scenario(s, opts, std::cout);
    std::cout << "wrote " << r.artifacts.size() << " artifacts to " << r.output << '\n';
    if (r.exit_code == kCheckFailed) {
      std::cerr << "failing checks:";
      for (const auto& name : r.failing_checks) std::cerr << ' ' << name;
      std::cerr << '\n';
    } else if (r.exit_code == kSolverFailure) {
      std::cerr << "solver did not converge\n";
    }
    return r.exit_code;
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << '\n';
    return kParseError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kParseError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}
