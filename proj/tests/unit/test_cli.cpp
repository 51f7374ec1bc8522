#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pipeline.hpp"
#include "scenario.hpp"

using namespace stochlyap::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = STOCHLYAP_SCENARIOS;

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "stochlyap_cli_tests";
  fs::create_directories(p);
  return p;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int tool(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" STOCHLYAP_TOOL "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// Returns the ScenarioError message.
std::string parse_error(const fs::path& p) {
  try {
    load_scenario(p.string());
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return {};
}

const char* kBase = R"(name: t
dynamics: {model: multiplicative_1d, params: {sigma0: 1}}
grid: {lower: [-2], upper: [2], cells: [100]}
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("shipped scenarios load") {
  for (const auto& e : fs::directory_iterator(kScenarios)) {
    if (!e.is_regular_file()) continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_scenario(e.path().string()));
  }
}

TEST_CASE("benchmark scenario resolves as expected") {
  const auto s = load_scenario((kScenarios / "benchmark.yaml").string());
  CHECK(s.model == "multiplicative_1d");
  CHECK(s.stages == all_stages());
  CHECK(s.checks.size() == 12);
  CHECK(s.cells == std::vector<std::size_t>{400});
}

TEST_CASE("parse errors carry a location") {
  SUBCASE("unknown key") {
    const auto msg = parse_error(write("a.yaml", std::string(kBase) + "grdi: 3\n"));
    CHECK(msg.find("a.yaml:4:1:") != std::string::npos);
    CHECK(msg.find("grdi") != std::string::npos);
  }
  SUBCASE("bad yaml") {
    const auto msg = parse_error(write("b.yaml", std::string(kBase) + "stages: [validate\n"));
    CHECK(msg.find("b.yaml:") != std::string::npos);
  }
  SUBCASE("bad json") {
    const auto msg = parse_error(write("c.json", "{\n  \"name\": \"x\",\n  \"grid\": }\n"));
    CHECK(msg.find("c.json:3:") != std::string::npos);
  }
  SUBCASE("unknown model") {
    const auto msg = parse_error(write("d.yaml", "name: t\ndynamics: {model: nope}\ngrid: {lower: [0], upper: [1], cells: [4]}\n"));
    CHECK(msg.find("d.yaml:2:") != std::string::npos);
    CHECK(msg.find("nope") != std::string::npos);
  }
  SUBCASE("unknown check") {
    const auto msg = parse_error(write("e.yaml", std::string(kBase) + "checks:\n  - type: stability\n"));
    CHECK(msg.find("e.yaml:5:") != std::string::npos);
  }
  SUBCASE("missing field file") {
    const auto msg = parse_error(write("f.yaml", std::string(kBase) + "stages: [verify]\ncandidate: {kind: field, path: missing.csv}\n"));
    CHECK(msg.find("f.yaml:5:") != std::string::npos);
    CHECK(msg.find("missing.csv") != std::string::npos);
  }
}

TEST_CASE("describe") {
  std::ostringstream full, empty;
  describe(load_scenario((kScenarios / "benchmark.yaml").string()), full);
  CHECK(full.str().find("stages     5") != std::string::npos);
  describe(load_scenario((kScenarios / "empty_checks.yaml").string()), empty);
  CHECK(empty.str().find("analysis   0 stages") != std::string::npos);
  CHECK(tool("describe \"" + (kScenarios / "benchmark.yaml").string() + "\"") == 0);
}

TEST_CASE("exit codes") {
  const auto out = scratch() / "runs";
  const auto run = [&](const fs::path& s, const std::string& sub) {
    return tool("run \"" + s.string() + "\" -o \"" + (out / sub).string() + "\"");
  };
  CHECK(run(kScenarios / "validate_only.yaml", "validate") == 0);
  CHECK(run(kScenarios / "sigma3_radial.yaml", "sigma3") == 1);
  CHECK(run(write("bad.yaml", "name: [\n"), "bad") == 2);
  CHECK(tool("frobnicate") == 2);
  CHECK(tool("run", "STOCHLYAP_WORKERS=zero") == 2);
  CHECK(tool("run \"" + (kScenarios / "validate_only.yaml").string() + "\" -o \"" + (out / "w").string() + "\"",
             "STOCHLYAP_WORKERS=zero") == 2);
  const auto stuck = write("stuck.yaml", std::string(kBase) +
                                             "cost: {kind: power, gamma: 2}\nstages: [solve]\n"
                                             "infinite_horizon: {tol: 1.0e-300}\n");
  CHECK(run(stuck, "stuck") == 3);
}

TEST_CASE("runs are idempotent") {
  const auto out = scratch() / "idem";
  const auto quick = (kScenarios / "benchmark_quick.json").string();
  REQUIRE(tool("run \"" + quick + "\" -o \"" + (out / "a").string() + "\"") == 0);
  REQUIRE(tool("run \"" + quick + "\" -o \"" + (out / "b").string() + "\"", "STOCHLYAP_WORKERS=2") == 0);
  for (const char* f : {"manifest.json", "reports.json", "summary.json", "simulate.json", "paths.csv"}) {
    CAPTURE(f);
    const auto a = slurp(out / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(out / "b" / f));
  }
}

TEST_CASE("in-process run matches the artifacts list") {
  const auto s = load_scenario((kScenarios / "validate_only.yaml").string());
  std::ostringstream log;
  RunOptions opts;
  opts.output = (scratch() / "inproc").string();
  const auto r = run_scenario(s, opts, log);
  CHECK(r.exit_code == kOk);
  for (const auto& a : r.artifacts) CHECK(fs::exists(fs::path(*opts.output) / a));
}

}
