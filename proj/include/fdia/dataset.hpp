#pragma once

// Labeled measurement datasets: generation, splitting and on-disk formats
// (CSV + JSON sidecar, and a compact binary container).

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fdia/constraints.hpp"
#include "fdia/error.hpp"
#include "fdia/estimation.hpp"
#include "fdia/grid.hpp"
#include "fdia/random.hpp"

namespace fdia {

struct GenerationConfig {
  std::size_t legit_count = 30000;
  double pollution = 0.5;  // fraction of rows that receive false data
  int k_min = 71;          // inclusive
  int k_max = 99;          // inclusive
  double spread = 0.005;   // radians around the base angles
  double noise_sigma = 0.001;
  double false_alarm_rate = kDefaultFalseAlarmRate;
  std::size_t calibration_count = 5000;
  std::vector<int> test_ks{75, 80, 85, 90};
  std::size_t test_per_set = 1000;

  void validate(Eigen::Index m, Eigen::Index n) const {
    if (!(pollution >= 0.0 && pollution <= 1.0)) throw UsageError("pollution fraction must lie in [0, 1]");
    if (k_min > k_max) throw UsageError("k range is empty");
    if (k_min <= m - n || k_max > m)
      throw UsageError("k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) + "] infeasible: need " +
                       std::to_string(m - n) + " < k <= " + std::to_string(m));
    for (int k : test_ks)
      if (k <= m - n || k > m) throw UsageError("test k = " + std::to_string(k) + " infeasible for this case");
    if (spread < 0.0 || noise_sigma < 0.0) throw UsageError("spread and noise must be nonnegative");
    if (calibration_count == 0) throw UsageError("calibration set must not be empty");
  }
};

inline void to_json(nlohmann::json& j, const GenerationConfig& c) {
  j = {{"legit_count", c.legit_count}, {"pollution", c.pollution},       {"k_min", c.k_min},
       {"k_max", c.k_max},             {"spread", c.spread},             {"noise_sigma", c.noise_sigma},
       {"false_alarm_rate", c.false_alarm_rate}, {"calibration_count", c.calibration_count},
       {"test_ks", c.test_ks},         {"test_per_set", c.test_per_set}};
}

inline void from_json(const nlohmann::json& j, GenerationConfig& c) {
  c.legit_count = j.value("legit_count", c.legit_count);
  c.pollution = j.value("pollution", c.pollution);
  c.k_min = j.value("k_min", c.k_min);
  c.k_max = j.value("k_max", c.k_max);
  c.spread = j.value("spread", c.spread);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.false_alarm_rate = j.value("false_alarm_rate", c.false_alarm_rate);
  c.calibration_count = j.value("calibration_count", c.calibration_count);
  c.test_ks = j.value("test_ks", c.test_ks);
  c.test_per_set = j.value("test_per_set", c.test_per_set);
}

/// Column-per-sample storage. Normal rows have scenario id -1 and a zero
/// injection column.
struct Dataset {
  std::string case_name;
  Matrix z;
  std::vector<int> labels;
  std::vector<int> scenario_ids;
  Matrix a;
  std::vector<AttackScenario> scenarios;
  double mean_l1 = 0.0;  // mean L1 norm of the legitimate vectors
  double tau = 0.0;      // residual threshold used while generating
  std::uint64_t seed = 0;
  nlohmann::json generation = nlohmann::json::object();

  std::size_t size() const noexcept { return labels.size(); }
  Eigen::Index m() const noexcept { return z.rows(); }

  int k_of(std::size_t row) const {
    const int s = scenario_ids[row];
    return s < 0 ? 0 : scenarios[static_cast<std::size_t>(s)].k();
  }

  std::size_t count(int label) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label)); }

  /// Rows in the given order; only referenced scenarios are kept.
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.case_name = case_name;
    out.mean_l1 = mean_l1;
    out.tau = tau;
    out.seed = seed;
    out.generation = generation;
    out.z.resize(m(), static_cast<Eigen::Index>(rows.size()));
    out.a.resize(m(), static_cast<Eigen::Index>(rows.size()));
    std::vector<int> remap(scenarios.size(), -1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i];
      if (r >= size()) throw UsageError("row " + std::to_string(r) + " out of range");
      out.z.col(static_cast<Eigen::Index>(i)) = z.col(static_cast<Eigen::Index>(r));
      out.a.col(static_cast<Eigen::Index>(i)) = a.col(static_cast<Eigen::Index>(r));
      out.labels.push_back(labels[r]);
      const int s = scenario_ids[r];
      if (s >= 0 && remap[static_cast<std::size_t>(s)] < 0) {
        remap[static_cast<std::size_t>(s)] = static_cast<int>(out.scenarios.size());
        out.scenarios.push_back(scenarios[static_cast<std::size_t>(s)]);
      }
      out.scenario_ids.push_back(s < 0 ? -1 : remap[static_cast<std::size_t>(s)]);
    }
    return out;
  }

  /// Rows with the given label, in order.
  Dataset with_label(int label) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i)
      if (labels[i] == label) rows.push_back(i);
    return subset(rows);
  }

  void validate() const {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (z.cols() != n || a.cols() != n || a.rows() != z.rows() || scenario_ids.size() != labels.size())
      throw DimensionError("dataset columns are inconsistent");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int s = scenario_ids[i];
      if (labels[i] != kNormal && labels[i] != kFalse) throw DataError("row " + std::to_string(i) + ": label must be 0 or 1");
      if (labels[i] == kFalse && s < 0) throw DataError("row " + std::to_string(i) + ": False row without scenario");
      if (s >= static_cast<int>(scenarios.size())) throw DataError("row " + std::to_string(i) + ": unknown scenario id");
      if (s >= 0 && scenarios[static_cast<std::size_t>(s)].m() != z.rows())
        throw DimensionError("row " + std::to_string(i) + ": scenario size differs from m");
    }
  }
};

/// Constraint systems for every scenario of a dataset, sharing one B.
inline std::vector<ConstraintSystem> build_systems(const std::shared_ptr<const StealthSpace>& space, const Dataset& ds) {
  std::vector<ConstraintSystem> out;
  out.reserve(ds.scenarios.size());
  for (const auto& s : ds.scenarios) out.push_back(build_constraints(space, s));
  return out;
}

/// Per-row pointers into `systems` (nullptr for Normal rows).
inline std::vector<const ConstraintSystem*> row_systems(const Dataset& ds, const std::vector<ConstraintSystem>& systems) {
  std::vector<const ConstraintSystem*> out(ds.size(), nullptr);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.scenario_ids[i] >= 0) out[i] = &systems.at(static_cast<std::size_t>(ds.scenario_ids[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Generation

/// Case-specific state shared by every generated set.
class GenerationContext {
 public:
  GenerationContext(const GridCase& gc, GenerationConfig cfg, std::uint64_t seed)
      : case_(gc), h_(build_h(gc)), cfg_(std::move(cfg)), seed_(seed), estimator_(h_), space_(StealthSpace::make(h_)) {
    cfg_.validate(h_.m(), h_.n());
    std::vector<MeasurementVector> clean;
    clean.reserve(cfg_.calibration_count);
    Rng rng(derive_seed(seed_, "calibration"));
    for (const auto& x : sample_states(case_, cfg_.calibration_count, cfg_.spread, rng))
      clean.push_back(measure(h_, x, cfg_.noise_sigma, rng));
    estimator_.calibrate_tau(clean, cfg_.false_alarm_rate);
  }

  const GridCase& grid() const noexcept { return case_; }
  const MeasurementMatrix& h() const noexcept { return h_; }
  const GenerationConfig& config() const noexcept { return cfg_; }
  const Estimator& estimator() const noexcept { return estimator_; }
  const std::shared_ptr<const StealthSpace>& space() const noexcept { return space_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// One legitimate measurement from its own stream. Draws flagged by the
  /// residual test are redrawn so every emitted vector passes it.
  MeasurementVector clean_measurement(std::string_view stream, std::uint64_t index) const {
    Rng rng(derive_seed(seed_, stream, index));
    constexpr int kMaxRedraws = 1000;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      const auto x = sample_states(case_, 1, cfg_.spread, rng).front();
      auto z = measure(h_, x, cfg_.noise_sigma, rng);
      if (!estimator_.detect(z)) return z;
    }
    throw NumericalError("could not draw a measurement that passes the residual test");
  }

  FalseDataVector inject(const ConstraintSystem& cs, double mean_l1, Rng& rng) const {
    const double target = sample_target_l1(mean_l1, rng);
    auto fdv = generate_false_data(cs, target, rng);
    if (!space_->is_stealthy(fdv.a)) throw NumericalError("generated false data violates the stealth constraint");
    return fdv;
  }

  nlohmann::json echo() const {
    return {{"case", case_.name()}, {"seed", seed_}, {"tau", *estimator_.tau()}, {"config", cfg_}};
  }

 private:
  GridCase case_;
  MeasurementMatrix h_;
  GenerationConfig cfg_;
  std::uint64_t seed_;
  Estimator estimator_;
  std::shared_ptr<const StealthSpace> space_;
};

/// legit_count clean vectors; a seeded random subset of round(pollution *
/// legit_count) of them receives false data with k uniform in
/// [k_min, k_max] and a random compromised set.
inline Dataset build_train_set(const GenerationContext& ctx) {
  const auto& cfg = ctx.config();
  const std::size_t n = cfg.legit_count;
  const auto m = ctx.h().m();
  Dataset ds;
  ds.case_name = ctx.grid().name();
  ds.seed = ctx.seed();
  ds.tau = *ctx.estimator().tau();
  ds.generation = ctx.echo();
  ds.z.resize(m, static_cast<Eigen::Index>(n));
  ds.a = Matrix::Zero(m, static_cast<Eigen::Index>(n));
  ds.labels.assign(n, kNormal);
  ds.scenario_ids.assign(n, -1);
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.z.col(static_cast<Eigen::Index>(i)) = ctx.clean_measurement("train", i);
    l1 += ds.z.col(static_cast<Eigen::Index>(i)).lpNorm<1>();
  }
  ds.mean_l1 = n ? l1 / static_cast<double>(n) : 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng mask(derive_seed(ctx.seed(), "pollution-mask"));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(mask)]);
  }
  const auto polluted = static_cast<std::size_t>(std::llround(cfg.pollution * static_cast<double>(n)));
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(polluted));
  for (std::size_t j = 0; j < polluted; ++j) {
    const std::size_t i = order[j];
    Rng rng(derive_seed(ctx.seed(), "pollute", i));
    std::uniform_int_distribution<int> kd(cfg.k_min, cfg.k_max);
    auto scenario = AttackScenario::random(m, kd(rng), rng);
    const auto cs = build_constraints(ctx.space(), scenario);
    const auto fdv = ctx.inject(cs, ds.mean_l1, rng);
    ds.z.col(static_cast<Eigen::Index>(i)) += fdv.a;
    ds.a.col(static_cast<Eigen::Index>(i)) = fdv.a;
    ds.labels[i] = kFalse;
    ds.scenario_ids[i] = static_cast<int>(ds.scenarios.size());
    ds.scenarios.push_back(std::move(scenario));
  }
  return ds;
}

/// One all-False set per configured k, each with a single fixed scenario.
/// The injection magnitude follows the training set's mean L1 norm.
inline std::vector<Dataset> build_test_sets(const GenerationContext& ctx, double mean_l1) {
  if (!(mean_l1 > 0.0)) throw UsageError("test sets need the training set's mean L1 norm");
  const auto& cfg = ctx.config();
  const auto m = ctx.h().m();
  std::vector<Dataset> sets;
  for (int k : cfg.test_ks) {
    const auto key = static_cast<std::uint64_t>(k);
    Rng srng(derive_seed(ctx.seed(), "test-scenario", key));
    auto scenario = AttackScenario::random(m, k, srng);
    const auto cs = build_constraints(ctx.space(), scenario);
    Dataset ds;
    ds.case_name = ctx.grid().name();
    ds.seed = ctx.seed();
    ds.tau = *ctx.estimator().tau();
    ds.mean_l1 = mean_l1;
    ds.generation = ctx.echo();
    ds.z.resize(m, static_cast<Eigen::Index>(cfg.test_per_set));
    ds.a.resize(m, static_cast<Eigen::Index>(cfg.test_per_set));
    ds.scenarios.push_back(scenario);
    const std::string stream = "test-" + std::to_string(k);
    for (std::size_t i = 0; i < cfg.test_per_set; ++i) {
      Rng rng(derive_seed(ctx.seed(), stream + "-inject", i));
      const auto fdv = ctx.inject(cs, mean_l1, rng);
      ds.z.col(static_cast<Eigen::Index>(i)) = ctx.clean_measurement(stream, i) + fdv.a;
      ds.a.col(static_cast<Eigen::Index>(i)) = fdv.a;
      ds.labels.push_back(kFalse);
      ds.scenario_ids.push_back(0);
    }
    sets.push_back(std::move(ds));
  }
  return sets;
}

struct Split {
  Dataset train;
  Dataset test;
};

/// Seeded shuffle, then the first test_fraction of rows form the test part.
inline Split split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw UsageError("test fraction must lie in [0, 1)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  const std::span<const std::size_t> all(order);
  return {ds.subset(all.subspan(n_test)), ds.subset(all.first(n_test))};
}

// ---------------------------------------------------------------------------
// Number formatting shared by all text outputs

/// 17 significant digits, enough to read back the same double.
inline std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::size_t line, std::size_t column) {
  double v = 0.0;
  const auto* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto r = std::from_chars(first, s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ParseError("malformed number '" + std::string(s) + "'", line, column);
  return v;
}

inline long long parse_integer(std::string_view s, std::size_t line, std::size_t column) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ParseError("malformed integer '" + std::string(s) + "'", line, column);
  return v;
}

// ---------------------------------------------------------------------------
// CSV + sidecar

inline constexpr int kDatasetFormatVersion = 1;

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".scenarios.json");
  return p;
}

namespace detail {

inline nlohmann::json dataset_meta(const Dataset& ds) {
  nlohmann::json scen = nlohmann::json::array();
  for (const auto& s : ds.scenarios) scen.push_back({{"k", s.k()}, {"compromised", s.compromised()}});
  return {{"format", "fdia-dataset"}, {"version", kDatasetFormatVersion}, {"case", ds.case_name},
          {"m", ds.m()},              {"rows", ds.size()},               {"mean_l1", ds.mean_l1},
          {"tau", ds.tau},            {"seed", ds.seed},                 {"generation", ds.generation},
          {"scenarios", scen}};
}

inline void read_dataset_meta(const nlohmann::json& meta, Dataset& ds) {
  try {
    if (meta.at("format") != "fdia-dataset") throw DataError("not a dataset description");
    if (meta.at("version").get<int>() > kDatasetFormatVersion)
      throw VersionError("dataset format version " + meta.at("version").dump() + " is newer than supported");
    ds.case_name = meta.at("case").get<std::string>();
    ds.mean_l1 = meta.at("mean_l1").get<double>();
    ds.tau = meta.at("tau").get<double>();
    ds.seed = meta.value("seed", std::uint64_t{0});
    ds.generation = meta.value("generation", nlohmann::json::object());
    const auto m = meta.at("m").get<Eigen::Index>();
    for (const auto& s : meta.at("scenarios")) {
      AttackScenario sc(s.at("compromised").get<std::vector<int>>(), m);
      if (sc.k() != s.at("k").get<int>()) throw DataError("scenario k disagrees with its index list");
      ds.scenarios.push_back(std::move(sc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed dataset description: ") + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

/// label,k,scenario_id,z_0..z_{m-1}; injected vectors go to the sidecar.
inline std::string dataset_to_csv(const Dataset& ds) {
  std::string out = "label,k,scenario_id";
  for (Eigen::Index j = 0; j < ds.m(); ++j) out += ",z_" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(ds.labels[i]) + ',' + std::to_string(ds.k_of(i)) + ',' + std::to_string(ds.scenario_ids[i]);
    for (Eigen::Index j = 0; j < ds.m(); ++j) {
      out += ',';
      out += format_double(ds.z(j, static_cast<Eigen::Index>(i)));
    }
    out += '\n';
  }
  return out;
}

/// Sidecar: metadata, scenarios and, per False row, a restricted to C.
inline nlohmann::json dataset_sidecar(const Dataset& ds) {
  auto meta = detail::dataset_meta(ds);
  nlohmann::json inj = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int s = ds.scenario_ids[i];
    if (s < 0) continue;
    std::vector<double> values;
    for (int c : ds.scenarios[static_cast<std::size_t>(s)].compromised())
      values.push_back(ds.a(c, static_cast<Eigen::Index>(i)));
    inj.push_back({{"row", i}, {"a", values}});
  }
  meta["injections"] = std::move(inj);
  return meta;
}

inline Dataset dataset_from_csv(std::string_view csv, const nlohmann::json& sidecar) {
  Dataset ds;
  detail::read_dataset_meta(sidecar, ds);
  const auto m = sidecar.at("m").get<Eigen::Index>();
  const auto rows = sidecar.at("rows").get<std::size_t>();
  ds.z.resize(m, static_cast<Eigen::Index>(rows));
  ds.a = Matrix::Zero(m, static_cast<Eigen::Index>(rows));

  std::size_t line = 0, pos = 0, row = 0;
  const std::size_t width = static_cast<std::size_t>(m) + 3;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view text = csv.substr(pos, end - pos);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    pos = end + 1;
    ++line;
    if (line == 1) {
      if (!text.starts_with("label,k,scenario_id")) throw ParseError("missing dataset header", 1, 1);
      continue;
    }
    if (text.empty()) continue;
    if (row >= rows) throw ParseError("more rows than the sidecar declares", line, 1);
    std::size_t field = 0, start = 0;
    int label = 0, k = 0, sid = -1;
    while (start <= text.size()) {
      auto comma = text.find(',', start);
      if (comma == std::string_view::npos) comma = text.size();
      const auto cell = text.substr(start, comma - start);
      const std::size_t col = start + 1;
      if (field >= width) throw ParseError("too many fields", line, col);
      if (field == 0) label = static_cast<int>(parse_integer(cell, line, col));
      else if (field == 1) k = static_cast<int>(parse_integer(cell, line, col));
      else if (field == 2) sid = static_cast<int>(parse_integer(cell, line, col));
      else ds.z(static_cast<Eigen::Index>(field - 3), static_cast<Eigen::Index>(row)) = parse_double(cell, line, col);
      ++field;
      start = comma + 1;
    }
    if (field != width) throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(field), line, 1);
    if (sid >= static_cast<int>(ds.scenarios.size())) throw ParseError("unknown scenario id", line, 1);
    if ((sid < 0 ? 0 : ds.scenarios[static_cast<std::size_t>(sid)].k()) != k)
      throw ParseError("k column disagrees with the scenario", line, 1);
    ds.labels.push_back(label);
    ds.scenario_ids.push_back(sid);
    ++row;
  }
  if (row != rows) throw DataError("CSV holds " + std::to_string(row) + " rows, sidecar declares " + std::to_string(rows));
  try {
    for (const auto& inj : sidecar.at("injections")) {
      const auto r = inj.at("row").get<std::size_t>();
      if (r >= rows || ds.scenario_ids[r] < 0) throw DataError("injection for a row without scenario");
      const auto& c = ds.scenarios[static_cast<std::size_t>(ds.scenario_ids[r])].compromised();
      const auto values = inj.at("a").get<std::vector<double>>();
      if (values.size() != c.size()) throw DimensionError("injection length differs from k");
      for (std::size_t t = 0; t < c.size(); ++t) ds.a(c[t], static_cast<Eigen::Index>(r)) = values[t];
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed injection records: ") + e.what());
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Binary container: magic, u32 version, u64 header length, JSON header,
// then i32 labels, i32 scenario ids, f64 z and f64 a (column-major).

inline constexpr char kBinaryMagic[8] = {'F', 'D', 'I', 'A', 'D', 'S', 'E', 'T'};

namespace detail {

template <class T>
void put(std::string& out, const T& v) {
  static_assert(std::endian::native == std::endian::little, "binary container assumes a little-endian host");
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("binary dataset is truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

}  // namespace detail

inline std::string dataset_to_binary(const Dataset& ds) {
  const std::string header = detail::dataset_meta(ds).dump();
  std::string out(kBinaryMagic, sizeof kBinaryMagic);
  detail::put(out, static_cast<std::uint32_t>(kDatasetFormatVersion));
  detail::put(out, static_cast<std::uint64_t>(header.size()));
  out += header;
  for (int l : ds.labels) detail::put(out, static_cast<std::int32_t>(l));
  for (int s : ds.scenario_ids) detail::put(out, static_cast<std::int32_t>(s));
  out.append(reinterpret_cast<const char*>(ds.z.data()), static_cast<std::size_t>(ds.z.size()) * sizeof(double));
  out.append(reinterpret_cast<const char*>(ds.a.data()), static_cast<std::size_t>(ds.a.size()) * sizeof(double));
  return out;
}

inline bool is_binary_dataset(std::string_view bytes) {
  return bytes.size() >= sizeof kBinaryMagic && std::memcmp(bytes.data(), kBinaryMagic, sizeof kBinaryMagic) == 0;
}

inline Dataset dataset_from_binary(std::string_view bytes) {
  if (!is_binary_dataset(bytes)) throw DataError("not a binary dataset container");
  std::size_t pos = sizeof kBinaryMagic;
  const auto version = detail::take<std::uint32_t>(bytes, pos);
  if (version > static_cast<std::uint32_t>(kDatasetFormatVersion))
    throw VersionError("binary dataset version " + std::to_string(version) + " is newer than supported");
  const auto hlen = detail::take<std::uint64_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw DataError("binary dataset is truncated");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt binary dataset header: ") + e.what());
  }
  pos += hlen;
  Dataset ds;
  detail::read_dataset_meta(meta, ds);
  const auto m = meta.at("m").get<Eigen::Index>();
  const auto rows = meta.at("rows").get<std::size_t>();
  const std::size_t expected = rows * 8 + 2 * rows * static_cast<std::size_t>(m) * sizeof(double);
  if (bytes.size() - pos != expected) throw DataError("binary dataset payload has the wrong size");
  for (std::size_t i = 0; i < rows; ++i) ds.labels.push_back(detail::take<std::int32_t>(bytes, pos));
  for (std::size_t i = 0; i < rows; ++i) ds.scenario_ids.push_back(detail::take<std::int32_t>(bytes, pos));
  ds.z.resize(m, static_cast<Eigen::Index>(rows));
  ds.a.resize(m, static_cast<Eigen::Index>(rows));
  std::memcpy(ds.z.data(), bytes.data() + pos, static_cast<std::size_t>(ds.z.size()) * sizeof(double));
  pos += static_cast<std::size_t>(ds.z.size()) * sizeof(double);
  std::memcpy(ds.a.data(), bytes.data() + pos, static_cast<std::size_t>(ds.a.size()) * sizeof(double));
  ds.validate();
  return ds;
}

/// ".bin" writes the binary container; anything else writes CSV plus the
/// sidecar next to it.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (path.extension() == ".bin") {
    detail::write_file(path, dataset_to_binary(ds));
  } else {
    detail::write_file(path, dataset_to_csv(ds));
    detail::write_file(sidecar_path(path), dataset_sidecar(ds).dump());
  }
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (is_binary_dataset(bytes)) return dataset_from_binary(bytes);
  const auto side = sidecar_path(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(side));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed sidecar " + side.string() + ": " + e.what());
  }
  return dataset_from_csv(bytes, meta);
}

}  // namespace fdia
