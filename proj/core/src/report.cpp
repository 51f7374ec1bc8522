#include "stochlyap/report.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace stochlyap {

namespace {

using json = nlohmann::ordered_json;

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw std::invalid_argument("report json: bad number '" + s + "'");
}

json encode(const CheckReport& r) {
  json j;
  j["check_name"] = r.check_name;
  j["verdict"] = to_string(r.verdict);
  json ev = json::array();
  for (const auto& e : r.evidence) {
    json item;
    item["quantity"] = e.quantity;
    item["value"] = number(e.value);
    item["tolerance"] = number(e.tolerance);
    item["provenance"] = e.provenance;
    ev.push_back(std::move(item));
  }
  j["evidence"] = std::move(ev);
  j["notes"] = r.notes;
  j["config_digest"] = r.config_digest;
  j["seed"] = r.seed;
  return j;
}

}  // namespace

std::string to_json(const CheckReport& report, int indent) { return encode(report).dump(indent); }

std::string to_json(const std::vector<CheckReport>& reports, int indent) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(encode(r));
  return arr.dump(indent);
}

std::string to_json(const Estimate& e, int indent) {
  json j;
  j["value"] = number(e.value);
  j["std_error"] = number(e.std_error);
  j["half_width"] = number(e.half_width);
  j["lower"] = number(e.lower);
  j["upper"] = number(e.upper);
  j["n"] = e.n;
  return j.dump(indent);
}

CheckReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  CheckReport r;
  r.check_name = j.at("check_name").get<std::string>();
  const auto v = j.at("verdict").get<std::string>();
  if (v == "pass") r.verdict = Verdict::Pass;
  else if (v == "fail") r.verdict = Verdict::Fail;
  else if (v == "indeterminate") r.verdict = Verdict::Indeterminate;
  else if (v == "vacuous") r.verdict = Verdict::Vacuous;
  else throw std::invalid_argument("report json: unknown verdict '" + v + "'");
  for (const auto& e : j.at("evidence")) {
    r.evidence.push_back({e.at("quantity").get<std::string>(), read_number(e.at("value")),
                          read_number(e.at("tolerance")), e.at("provenance").get<std::string>()});
  }
  r.notes = j.at("notes").get<std::vector<std::string>>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace stochlyap
