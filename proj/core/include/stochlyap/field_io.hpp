#pragma once

#include <iosfwd>
#include <string>

#include "stochlyap/field.hpp"

namespace stochlyap {

/// CSV layout:
///   # stochlyap-field v1
///   dim,<N>
///   lower,<l_1>,...,<l_N>
///   upper,<u_1>,...,<u_N>
///   cells,<c_1>,...,<c_N>
///   <value of node 0>
///   <value of node 1>
///   ...
/// Nodes in row-major order (last axis fastest). Values use 17 significant
/// digits so a round trip is exact.
void write_field_csv(std::ostream& os, const ScalarField& field);
ScalarField read_field_csv(std::istream& is);

/// Binary layout, little-endian: "SLF1", u64 N, N x f64 lower, N x f64 upper,
/// N x u64 cells, then node_count x f64 values.
void write_field_binary(std::ostream& os, const ScalarField& field);
ScalarField read_field_binary(std::istream& is);

/// Same header as the field CSV (with "# stochlyap-policy v1" and an extra
/// "controls,<K>" line), then one control index per node.
void write_policy_csv(std::ostream& os, const FeedbackPolicy& policy);
FeedbackPolicy read_policy_csv(std::istream& is);

/// Reads CSV or binary depending on the first bytes of the file.
ScalarField load_field(const std::string& path);
void save_field_csv(const std::string& path, const ScalarField& field);

}  // namespace stochlyap
