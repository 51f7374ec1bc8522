#include "stochlyap/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace stochlyap {

namespace {

static_assert(std::endian::native == std::endian::little, "binary field I/O assumes little-endian");

void write_header(std::ostream& os, const char* tag, const Grid& g) {
  os << tag << '\n' << "dim," << g.dim() << '\n';
  os << std::setprecision(17);
  os << "lower";
  for (double v : g.lower()) os << ',' << v;
  os << "\nupper";
  for (double v : g.upper()) os << ',' << v;
  os << "\ncells";
  for (std::size_t v : g.cells()) os << ',' << v;
  os << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw std::runtime_error("field csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::string next_line(std::istream& is, std::size_t& line) {
  std::string s;
  if (!std::getline(is, s)) throw std::runtime_error("field csv: unexpected end at line " + std::to_string(line + 1));
  ++line;
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::string> keyed(std::istream& is, std::size_t& line, const char* key, std::size_t n) {
  auto parts = split(next_line(is, line));
  if (parts.empty() || parts[0] != key || parts.size() != n + 1) {
    throw std::runtime_error("field csv line " + std::to_string(line) + ": expected '" + key +
                             "' with " + std::to_string(n) + " entries");
  }
  parts.erase(parts.begin());
  return parts;
}

Grid read_header(std::istream& is, const char* tag, std::size_t& line) {
  if (next_line(is, line) != tag) {
    throw std::runtime_error(std::string("field csv line 1: expected '") + tag + "'");
  }
  const auto d = keyed(is, line, "dim", 1);
  const double dim = parse_double(d[0], line);
  if (dim < 1 || dim != static_cast<double>(static_cast<std::size_t>(dim))) {
    throw std::runtime_error("field csv: bad dimension");
  }
  const auto n = static_cast<std::size_t>(dim);
  std::vector<double> lo, hi;
  std::vector<std::size_t> cells;
  for (const auto& s : keyed(is, line, "lower", n)) lo.push_back(parse_double(s, line));
  for (const auto& s : keyed(is, line, "upper", n)) hi.push_back(parse_double(s, line));
  for (const auto& s : keyed(is, line, "cells", n)) {
    const double c = parse_double(s, line);
    if (c < 1 || c != static_cast<double>(static_cast<std::size_t>(c))) {
      throw std::runtime_error("field csv line " + std::to_string(line) + ": bad cell count");
    }
    cells.push_back(static_cast<std::size_t>(c));
  }
  return Grid(lo, hi, cells);
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("field binary: truncated");
  return v;
}

}  // namespace

void write_field_csv(std::ostream& os, const ScalarField& field) {
  write_header(os, "# stochlyap-field v1", field.grid());
  for (double v : field.values()) os << v << '\n';
}

ScalarField read_field_csv(std::istream& is) {
  std::size_t line = 0;
  Grid g = read_header(is, "# stochlyap-field v1", line);
  std::vector<double> values;
  values.reserve(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) values.push_back(parse_double(next_line(is, line), line));
  return ScalarField(std::move(g), std::move(values));
}

void write_field_binary(std::ostream& os, const ScalarField& field) {
  const Grid& g = field.grid();
  os.write("SLF1", 4);
  put<std::uint64_t>(os, g.dim());
  for (double v : g.lower()) put(os, v);
  for (double v : g.upper()) put(os, v);
  for (std::size_t c : g.cells()) put<std::uint64_t>(os, c);
  for (double v : field.values()) put(os, v);
}

ScalarField read_field_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SLF1", 4) != 0) {
    throw std::runtime_error("field binary: bad magic");
  }
  const auto n = get<std::uint64_t>(is);
  if (n == 0 || n > 16) throw std::runtime_error("field binary: bad dimension");
  std::vector<double> lo(n), hi(n);
  std::vector<std::size_t> cells(n);
  for (auto& v : lo) v = get<double>(is);
  for (auto& v : hi) v = get<double>(is);
  for (auto& v : cells) v = get<std::uint64_t>(is);
  Grid g(lo, hi, cells);
  std::vector<double> values(g.node_count());
  for (auto& v : values) v = get<double>(is);
  return ScalarField(std::move(g), std::move(values));
}

void write_policy_csv(std::ostream& os, const FeedbackPolicy& policy) {
  write_header(os, "# stochlyap-policy v1", policy.grid());
  os << "controls," << policy.control_count() << '\n';
  for (auto c : policy.indices()) os << c << '\n';
}

FeedbackPolicy read_policy_csv(std::istream& is) {
  std::size_t line = 0;
  Grid g = read_header(is, "# stochlyap-policy v1", line);
  const double k = parse_double(keyed(is, line, "controls", 1)[0], line);
  if (k < 1) throw std::runtime_error("policy csv: bad control count");
  std::vector<std::uint32_t> idx;
  idx.reserve(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const double v = parse_double(next_line(is, line), line);
    if (v < 0 || v != static_cast<double>(static_cast<std::uint32_t>(v))) {
      throw std::runtime_error("policy csv line " + std::to_string(line) + ": bad index");
    }
    idx.push_back(static_cast<std::uint32_t>(v));
  }
  return FeedbackPolicy(std::move(g), std::move(idx), static_cast<std::size_t>(k));
}

ScalarField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open field file '" + path + "'");
  char head[4] = {};
  in.read(head, 4);
  in.clear();
  in.seekg(0);
  if (std::memcmp(head, "SLF1", 4) == 0) return read_field_binary(in);
  return read_field_csv(in);
}

void save_field_csv(const std::string& path, const ScalarField& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_field_csv(out, field);
}

}  // namespace stochlyap
