#include <doctest.h>

#include <cmath>
#include <limits>

#include "stochlyap/report.hpp"

using namespace stochlyap;

namespace {

CheckReport sample() {
  CheckReport r;
  r.check_name = "lyapunov_stability";
  r.verdict = Verdict::Pass;
  r.add("exit_bound[x0=0.3]", 0.09, 0.0, "arithmetic");
  r.add("exit_probability[x0=0.3]", 0.1 + 0.2, 0.0071234567891234, "monte-carlo");
  r.notes.push_back("quoted \"note\"");
  r.config_digest = "abc123";
  r.seed = 18446744073709551615ull;
  return r;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("key order is fixed") {
  const auto s = to_json(sample());
  const auto pos = [&](const char* key) { return s.find(std::string("\"") + key + "\""); };
  CHECK(pos("check_name") < pos("verdict"));
  CHECK(pos("verdict") < pos("evidence"));
  CHECK(pos("evidence") < pos("notes"));
  CHECK(pos("notes") < pos("config_digest"));
  CHECK(pos("config_digest") < pos("seed"));
  CHECK(pos("quantity") < pos("value"));
  CHECK(pos("tolerance") < pos("provenance"));
}

TEST_CASE("equal reports give equal bytes") {
  CHECK(to_json(sample()) == to_json(sample()));
  CHECK(to_json(std::vector<CheckReport>{sample(), sample()}) ==
        to_json(std::vector<CheckReport>{sample(), sample()}));
}

TEST_CASE("round trip is exact") {
  const auto r = sample();
  const auto back = report_from_json(to_json(r));
  CHECK(back.check_name == r.check_name);
  CHECK(back.verdict == r.verdict);
  REQUIRE(back.evidence.size() == r.evidence.size());
  for (std::size_t i = 0; i < r.evidence.size(); ++i) {
    CHECK(back.evidence[i].quantity == r.evidence[i].quantity);
    CHECK(back.evidence[i].value == r.evidence[i].value);
    CHECK(back.evidence[i].tolerance == r.evidence[i].tolerance);
    CHECK(back.evidence[i].provenance == r.evidence[i].provenance);
  }
  CHECK(back.notes == r.notes);
  CHECK(back.seed == r.seed);
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("non-finite numbers are strings") {
  CheckReport r;
  r.check_name = "x";
  r.add("inf", std::numeric_limits<double>::infinity(), 0.0, "grid");
  r.add("nan", std::numeric_limits<double>::quiet_NaN(), -std::numeric_limits<double>::infinity(), "grid");
  const auto s = to_json(r);
  CHECK(s.find("null") == std::string::npos);
  const auto back = report_from_json(s);
  CHECK(back.evidence[0].value == std::numeric_limits<double>::infinity());
  CHECK(std::isnan(back.evidence[1].value));
  CHECK(back.evidence[1].tolerance == -std::numeric_limits<double>::infinity());
}

TEST_CASE("every verdict serializes") {
  for (auto v : {Verdict::Pass, Verdict::Fail, Verdict::Indeterminate, Verdict::Vacuous}) {
    CheckReport r;
    r.verdict = v;
    CHECK(report_from_json(to_json(r)).verdict == v);
  }
}

TEST_CASE("estimate json") {
  Estimate e;
  e.value = 0.25;
  e.half_width = 0.01;
  const auto s = to_json(e);
  CHECK(s.find("0.25") != std::string::npos);
  CHECK(s.find('\n') == std::string::npos);
}

}
