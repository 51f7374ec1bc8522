#pragma once

#include <string>
#include <vector>

#include "stochlyap/analysis.hpp"
#include "stochlyap/estimate.hpp"

namespace stochlyap {

/// Stable JSON schema:
///   {"check_name", "verdict", "evidence": [{"quantity", "value", "tolerance",
///    "provenance"}], "notes", "config_digest", "seed"}
/// Keys keep this order and numbers print in shortest round-trip form, so equal
/// reports serialize to equal bytes. Non-finite numbers become strings.
std::string to_json(const CheckReport& report, int indent = 2);
std::string to_json(const std::vector<CheckReport>& reports, int indent = 2);

std::string to_json(const Estimate& e, int indent = -1);

/// Inverse of to_json for a single report.
CheckReport report_from_json(const std::string& text);

}  // namespace stochlyap
