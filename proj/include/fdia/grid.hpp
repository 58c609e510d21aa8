#pragma once

// DC network model: case files, the measurement matrix H and synthetic
// operating states / branch-flow measurements.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fdia/error.hpp"
#include "fdia/random.hpp"

namespace fdia {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Voltage angles of the non-reference buses, radians.
using StateVector = Vector;
/// One active-power flow per branch, per-unit.
using MeasurementVector = Vector;

struct Bus {
  int id = 0;
  bool is_reference = false;
  double base_angle = 0.0;  // radians

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;  // per-unit

  bool operator==(const Branch&) const = default;
};

class GridCase {
 public:
  GridCase() = default;

  /// Throws DataError unless: exactly one reference bus, unique bus ids,
  /// branch endpoints exist, reactances > 0, connected branch graph.
  GridCase(std::string name, std::vector<Bus> buses, std::vector<Branch> branches)
      : name_(std::move(name)), buses_(std::move(buses)), branches_(std::move(branches)) {
    validate();
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }

  std::size_t measurement_count() const noexcept { return branches_.size(); }
  std::size_t state_count() const noexcept { return buses_.empty() ? 0 : buses_.size() - 1; }

  const Bus& reference_bus() const {
    return *std::find_if(buses_.begin(), buses_.end(),
                         [](const Bus& b) { return b.is_reference; });
  }

  /// Ids of the non-reference buses in ascending order; this is the column
  /// order of H and the component order of every StateVector.
  std::vector<int> state_bus_ids() const {
    std::vector<int> ids;
    for (const auto& b : buses_)
      if (!b.is_reference) ids.push_back(b.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  /// Base operating point in state order.
  StateVector base_state() const {
    std::map<int, double> angle;
    for (const auto& b : buses_) angle[b.id] = b.base_angle;
    const auto ids = state_bus_ids();
    StateVector x(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) x[static_cast<Eigen::Index>(i)] = angle[ids[i]];
    return x;
  }

  bool operator==(const GridCase&) const = default;

 private:
  void validate() const {
    if (buses_.empty()) throw DataError("case '" + name_ + "' has no buses");
    std::map<int, std::size_t> index;
    int refs = 0;
    for (const auto& b : buses_) {
      if (!index.emplace(b.id, index.size()).second)
        throw DataError("duplicate bus id " + std::to_string(b.id));
      refs += b.is_reference ? 1 : 0;
    }
    if (refs == 0) throw DataError("case '" + name_ + "' has no reference bus");
    if (refs > 1) throw DataError("case '" + name_ + "' has " + std::to_string(refs) + " reference buses");

    std::vector<std::size_t> parent(buses_.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (std::size_t l = 0; l < branches_.size(); ++l) {
      const auto& br = branches_[l];
      auto f = index.find(br.from_bus);
      auto t = index.find(br.to_bus);
      if (f == index.end() || t == index.end())
        throw DataError("branch " + std::to_string(l) + " references unknown bus " +
                        std::to_string(f == index.end() ? br.from_bus : br.to_bus));
      if (br.from_bus == br.to_bus)
        throw DataError("branch " + std::to_string(l) + " is a self-loop on bus " +
                        std::to_string(br.from_bus));
      if (!(br.reactance > 0.0))
        throw DataError("branch " + std::to_string(l) + " (" + std::to_string(br.from_bus) +
                        "-" + std::to_string(br.to_bus) + ") has nonpositive reactance");
      parent[find(f->second)] = find(t->second);
    }
    const auto root = find(0);
    for (std::size_t i = 1; i < buses_.size(); ++i)
      if (find(i) != root)
        throw DataError("case '" + name_ + "' is disconnected: bus " +
                        std::to_string(buses_[i].id) + " is not reachable from bus " +
                        std::to_string(buses_[0].id));
  }

  std::string name_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
};

enum class CaseFormat { native_json, matpower_subset };

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline GridCase parse_native(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(e.what(), line, col);
  }
  try {
    std::vector<Bus> buses;
    for (const auto& b : doc.at("buses"))
      buses.push_back({b.at("id").get<int>(), b.value("ref", false), b.value("angle", 0.0)});
    std::vector<Branch> branches;
    for (const auto& br : doc.at("branches"))
      branches.push_back({br.at("from").get<int>(), br.at("to").get<int>(), br.at("x").get<double>()});
    return GridCase(doc.value("name", std::string{"unnamed"}), std::move(buses), std::move(branches));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid case document: ") + e.what(), 0, 0);
  }
}

struct NumberToken {
  double value;
  std::size_t line;
  std::size_t column;
};

// Rows of a MATLAB-style matrix literal starting right after '['. Rows end at
// ';' or newline; '%' starts a comment; ',' and whitespace separate columns.
inline std::vector<std::vector<NumberToken>> read_matrix(std::string_view text, std::size_t pos,
                                                         std::string_view label) {
  std::vector<std::vector<NumberToken>> rows;
  std::vector<NumberToken> row;
  auto flush = [&] {
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == ']') {
      flush();
      return rows;
    }
    if (c == '%') {
      while (pos < text.size() && text[pos] != '\n') ++pos;
      continue;
    }
    if (c == ';' || c == '\n') {
      flush();
      ++pos;
      continue;
    }
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])) &&
           text[end] != ',' && text[end] != ';' && text[end] != ']' && text[end] != '%')
      ++end;
    std::string_view tok = text.substr(pos, end - pos);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    auto [line, col] = line_column(text, pos);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      throw ParseError("invalid number '" + std::string(text.substr(pos, end - pos)) + "' in " +
                           std::string(label),
                       line, col);
    row.push_back({v, line, col});
    pos = end;
  }
  auto [line, col] = line_column(text, text.size());
  throw ParseError("unterminated matrix " + std::string(label), line, col);
}

inline std::size_t find_matrix(std::string_view text, std::string_view field) {
  // Skip occurrences inside comments.
  std::size_t pos = 0;
  while ((pos = text.find(field, pos)) != std::string_view::npos) {
    std::size_t line_start = text.rfind('\n', pos);
    line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
    const bool commented = text.substr(line_start, pos - line_start).find('%') != std::string_view::npos;
    std::size_t p = pos + field.size();
    while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
    if (!commented && p < text.size() && text[p] == '=') {
      ++p;
      while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
      if (p < text.size() && text[p] == '[') return p + 1;
      auto [line, col] = line_column(text, p);
      throw ParseError("expected '[' after " + std::string(field) + " =", line, col);
    }
    pos += field.size();
  }
  return std::string_view::npos;
}

inline int as_int(const NumberToken& t, std::string_view what) {
  if (t.value != static_cast<double>(static_cast<int>(t.value)))
    throw ParseError(std::string(what) + " must be an integer", t.line, t.column);
  return static_cast<int>(t.value);
}

inline GridCase parse_matpower(std::string_view text) {
  const auto bus_at = find_matrix(text, "mpc.bus");
  const auto branch_at = find_matrix(text, "mpc.branch");
  if (bus_at == std::string_view::npos) throw ParseError("missing mpc.bus matrix", 0, 0);
  if (branch_at == std::string_view::npos) throw ParseError("missing mpc.branch matrix", 0, 0);

  std::string name = "unnamed";
  if (auto f = text.find("function"); f != std::string_view::npos) {
    auto eq = text.find('=', f);
    auto nl = text.find('\n', f);
    if (eq != std::string_view::npos && eq < nl) {
      auto s = text.substr(eq + 1, nl - eq - 1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      if (!s.empty()) name = std::string(s);
    }
  }

  std::vector<Bus> buses;
  for (const auto& row : read_matrix(text, bus_at, "mpc.bus")) {
    if (row.size() < 2) throw ParseError("bus row needs at least 2 columns", row[0].line, row[0].column);
    // MATPOWER bus type 3 is the slack (reference) bus.
    buses.push_back({as_int(row[0], "bus id"), as_int(row[1], "bus type") == 3, 0.0});
  }
  std::vector<Branch> branches;
  for (const auto& row : read_matrix(text, branch_at, "mpc.branch")) {
    if (row.size() < 4) throw ParseError("branch row needs at least 4 columns", row[0].line, row[0].column);
    branches.push_back({as_int(row[0], "fbus"), as_int(row[1], "tbus"), row[3].value});
  }
  return GridCase(std::move(name), std::move(buses), std::move(branches));
}

}  // namespace detail

/// Parses a case description. Errors: ParseError (with line/column when
/// known) for malformed text, DataError for invariant violations.
inline GridCase parse_case(std::string_view text, CaseFormat format) {
  return format == CaseFormat::native_json ? detail::parse_native(text) : detail::parse_matpower(text);
}

/// Picks the format from the extension: ".m" is matpower-subset, anything
/// else native JSON.
inline GridCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open case file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto format = path.extension() == ".m" ? CaseFormat::matpower_subset : CaseFormat::native_json;
  try {
    return parse_case(ss.str(), format);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
  }
}

/// Native JSON form of a case.
inline std::string serialize_case(const GridCase& gc) {
  nlohmann::json doc;
  doc["name"] = gc.name();
  auto& buses = doc["buses"] = nlohmann::json::array();
  for (const auto& b : gc.buses()) buses.push_back({{"id", b.id}, {"ref", b.is_reference}, {"angle", b.base_angle}});
  auto& branches = doc["branches"] = nlohmann::json::array();
  for (const auto& br : gc.branches()) branches.push_back({{"from", br.from_bus}, {"to", br.to_bus}, {"x", br.reactance}});
  return doc.dump(1);
}

struct MeasurementMatrix {
  Matrix h;                        // m x n
  std::vector<int> state_bus_ids;  // column -> bus id

  Eigen::Index m() const noexcept { return h.rows(); }
  Eigen::Index n() const noexcept { return h.cols(); }
};

/// Row l of H for branch i -> j with reactance x: +1/x in column i,
/// -1/x in column j; the reference-bus column is dropped.
inline MeasurementMatrix build_h(const GridCase& gc) {
  MeasurementMatrix mm;
  mm.state_bus_ids = gc.state_bus_ids();
  std::map<int, Eigen::Index> column;
  for (std::size_t j = 0; j < mm.state_bus_ids.size(); ++j)
    column[mm.state_bus_ids[j]] = static_cast<Eigen::Index>(j);
  const auto& branches = gc.branches();
  mm.h = Matrix::Zero(static_cast<Eigen::Index>(branches.size()),
                      static_cast<Eigen::Index>(mm.state_bus_ids.size()));
  for (std::size_t l = 0; l < branches.size(); ++l) {
    const auto row = static_cast<Eigen::Index>(l);
    const double y = 1.0 / branches[l].reactance;
    if (auto it = column.find(branches[l].from_bus); it != column.end()) mm.h(row, it->second) += y;
    if (auto it = column.find(branches[l].to_bus); it != column.end()) mm.h(row, it->second) -= y;
  }
  return mm;
}

/// Base angles plus i.i.d. uniform(-spread, spread) per component.
inline std::vector<StateVector> sample_states(const GridCase& gc, std::size_t count, double spread, Rng& rng) {
  if (spread < 0.0) throw UsageError("spread must be nonnegative");
  const StateVector base = gc.base_state();
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<StateVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    StateVector x = base;
    if (spread > 0.0)
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += u(rng);
    out.push_back(std::move(x));
  }
  return out;
}

inline std::vector<StateVector> sample_states(const GridCase& gc, std::size_t count, double spread,
                                              std::uint64_t seed) {
  Rng rng(seed);
  return sample_states(gc, count, spread, rng);
}

/// z = Hx + e, e ~ N(0, noise_sigma^2) i.i.d.
inline MeasurementVector measure(const MeasurementMatrix& h, const StateVector& x, double noise_sigma, Rng& rng) {
  if (x.size() != h.n())
    throw DimensionError("state has " + std::to_string(x.size()) + " components, H has " +
                         std::to_string(h.n()) + " columns");
  if (noise_sigma < 0.0) throw UsageError("noise sigma must be nonnegative");
  MeasurementVector z = h.h * x;
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> e(0.0, noise_sigma);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += e(rng);
  }
  return z;
}

inline MeasurementVector measure(const MeasurementMatrix& h, const StateVector& x, double noise_sigma,
                                 std::uint64_t seed) {
  Rng rng(seed);
  return measure(h, x, noise_sigma, rng);
}

}  // namespace fdia
