#pragma once

// Attack experiments and their reports.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdia/attack.hpp"
#include "fdia/dataset.hpp"
#include "fdia/defense.hpp"
#include "fdia/padding.hpp"

namespace fdia {

struct AttackRecord {
  int iterations = 0;
  AttackStatus status = AttackStatus::iteration_cap;
  bool fooled_attacker_view = false;
  int predicted = kFalse;  // detector decision on z_adv at evaluation
  int attack_offset = 0;   // padded models only
  int eval_offset = 0;
  double bias_l2 = 0.0;  // ||v||
  double valid_l2 = 0.0; // ||a + v||
  double seconds = 0.0;
};

/// One line of the report. bias/valid are means over samples classified
/// Normal and absent when there are none.
struct ReportRow {
  std::string case_name;
  int k = 0;
  double size = 0.0;  // step size, or alpha for vanilla sweeps
  double recall = 0.0;
  std::optional<double> bias_l2;
  std::optional<double> valid_l2;
  std::size_t n_success = 0;
  std::size_t n_total = 0;
  double median_seconds = 0.0;
  std::size_t attacker_view_success = 0;
  std::vector<AttackRecord> records;

  bool operator==(const ReportRow& o) const {
    return case_name == o.case_name && k == o.k && size == o.size && recall == o.recall && bias_l2 == o.bias_l2 &&
           valid_l2 == o.valid_l2 && n_success == o.n_success && n_total == o.n_total;
  }
};

struct MetricsReport {
  std::string kind = "attack";  // attack | vanilla
  nlohmann::json config = nlohmann::json::object();
  std::vector<ReportRow> rows;
};

inline ReportRow summarize(std::string case_name, int k, double size, std::vector<AttackRecord> records) {
  ReportRow row;
  row.case_name = std::move(case_name);
  row.k = k;
  row.size = size;
  row.n_total = records.size();
  double bias = 0.0, valid = 0.0;
  std::vector<double> secs;
  for (const auto& r : records) {
    if (r.fooled_attacker_view) ++row.attacker_view_success;
    secs.push_back(r.seconds);
    if (r.predicted == kNormal) {
      ++row.n_success;
      bias += r.bias_l2;
      valid += r.valid_l2;
    }
  }
  row.recall = row.n_total ? static_cast<double>(row.n_total - row.n_success) / static_cast<double>(row.n_total) : 0.0;
  if (row.n_success) {
    row.bias_l2 = bias / static_cast<double>(row.n_success);
    row.valid_l2 = valid / static_cast<double>(row.n_success);
  }
  if (!secs.empty()) {
    std::nth_element(secs.begin(), secs.begin() + static_cast<std::ptrdiff_t>(secs.size() / 2), secs.end());
    row.median_seconds = secs[secs.size() / 2];
  }
  row.records = std::move(records);
  return row;
}

struct ExperimentConfig {
  std::vector<double> sizes{0.1};
  int max_iters = kDefaultMaxIterations;
  std::uint64_t seed = 0;  // padded models: attacker and evaluation offsets
};

namespace detail {

inline void check_set(const Dataset& set, Eigen::Index m) {
  if (set.m() != m) throw DimensionError("test set has " + std::to_string(set.m()) + " measurements, model expects " + std::to_string(m));
  if (set.scenarios.size() != 1) throw DataError("a test set must hold exactly one scenario");
  for (int l : set.labels)
    if (l != kFalse) throw DataError("test sets contain only False rows");
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Attacks every sample of every set with each step size and classifies the
/// result with the same network.
inline MetricsReport run_attack_experiment(const MlpModel& model, const std::shared_ptr<const StealthSpace>& space,
                                           std::span<const Dataset> sets, const ExperimentConfig& cfg) {
  MetricsReport report;
  report.config = {{"model", "plain"}, {"sizes", cfg.sizes}, {"max_iters", cfg.max_iters}, {"seed", cfg.seed}};
  const PlainView view(model);
  for (const auto& set : sets) {
    detail::check_set(set, model.input_dim());
    const auto cs = build_constraints(space, set.scenarios.front());
    for (double size : cfg.sizes) {
      AttackConfig ac{size, cfg.max_iters, std::nullopt};
      std::vector<AttackRecord> records;
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = craft_perturbation(view, cs, set.z.col(c), set.a.col(c), ac);
        AttackRecord rec;
        rec.seconds = detail::seconds_since(t0);
        rec.iterations = r.iterations;
        rec.status = r.status;
        rec.fooled_attacker_view = r.success;
        rec.predicted = predict(model, Vector(set.z.col(c) + r.v));
        rec.bias_l2 = r.v.norm();
        rec.valid_l2 = r.a_hat.norm();
        records.push_back(rec);
      }
      report.rows.push_back(summarize(set.case_name, set.scenarios.front().k(), size, std::move(records)));
    }
  }
  return report;
}

/// White-box attack at one uniformly drawn offset per sample, evaluated at
/// an independent fresh offset.
inline MetricsReport run_attack_experiment(const PaddedModel& model, const std::shared_ptr<const StealthSpace>& space,
                                           std::span<const Dataset> sets, const ExperimentConfig& cfg) {
  MetricsReport report;
  report.config = {{"model", "padded"},      {"pad_width", model.pad_width()}, {"sizes", cfg.sizes},
                   {"max_iters", cfg.max_iters}, {"seed", cfg.seed}};
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& set = sets[s];
    detail::check_set(set, model.m());
    const auto cs = build_constraints(space, set.scenarios.front());
    for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
      const double size = cfg.sizes[si];
      Rng attacker(derive_seed(cfg.seed, "attacker-offset", s * 1000 + si));
      PaddedInference evaluator(model, derive_seed(cfg.seed, "eval-offset", s * 1000 + si));
      std::vector<AttackRecord> records;
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        AttackRecord rec;
        rec.attack_offset = model.draw_offset(attacker);
        AttackConfig ac{size, cfg.max_iters, rec.attack_offset};
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = attack_padded(model, cs, set.z.col(c), set.a.col(c), ac);
        rec.seconds = detail::seconds_since(t0);
        rec.iterations = r.iterations;
        rec.status = r.status;
        rec.fooled_attacker_view = r.success;
        const auto eval = evaluator.infer(set.z.col(c) + r.v);
        rec.predicted = eval.label;
        rec.eval_offset = eval.offset;
        rec.bias_l2 = r.v.norm();
        rec.valid_l2 = r.a_hat.norm();
        records.push_back(rec);
      }
      report.rows.push_back(summarize(set.case_name, set.scenarios.front().k(), size, std::move(records)));
    }
  }
  return report;
}

/// Scales each injected vector by alpha: z' = z_a + (alpha - 1) a.
inline MetricsReport run_vanilla_sweep(const MlpModel& model, std::span<const Dataset> sets, std::span<const double> alphas) {
  MetricsReport report;
  report.kind = "vanilla";
  report.config = {{"model", "plain"}, {"alphas", std::vector<double>(alphas.begin(), alphas.end())}};
  for (const auto& set : sets) {
    detail::check_set(set, model.input_dim());
    for (double alpha : alphas) {
      const Matrix scaled = set.z + (alpha - 1.0) * set.a;
      const auto predicted = predict_batch(model, scaled);
      std::vector<AttackRecord> records(set.size());
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        auto& rec = records[i];
        rec.predicted = predicted[i];
        rec.fooled_attacker_view = predicted[i] == kNormal;
        rec.status = rec.fooled_attacker_view ? AttackStatus::fooled : AttackStatus::iteration_cap;
        rec.bias_l2 = std::abs(alpha - 1.0) * set.a.col(c).norm();
        rec.valid_l2 = std::abs(alpha) * set.a.col(c).norm();
      }
      report.rows.push_back(summarize(set.case_name, set.scenarios.front().k(), alpha, std::move(records)));
    }
  }
  return report;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("spearman needs two equally long series of length >= 2");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t < j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j - 1);
      i = j;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const Eigen::Map<const Vector> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
  const Eigen::Map<const Vector> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  return denom > 0.0 ? da.dot(db) / denom : 0.0;
}

// ---------------------------------------------------------------------------
// Adversarial detection

struct DetectionExperiment {
  AdversarialDetector detector;
  Matrix false_vectors;        // injected a of the False class
  Matrix adversarial_vectors;  // a + v of the adversarial class
  std::vector<int> false_k;
  std::vector<int> adversarial_k;
  std::size_t attacked = 0;
  std::size_t stealth_violations = 0;
  double mimic_auc = 0.0;  // attacked model's Normal-vs-False logit gap used as the score
};

/// The False rows of `data` are shuffled and halved. The first half stays
/// as measured; the second half is attacked against `model` and every
/// successful result becomes an adversarial sample. Both classes are
/// trimmed to the same size before the auxiliary classifier is trained.
inline DetectionExperiment run_detection_experiment(const MlpModel& model, const std::shared_ptr<const StealthSpace>& space,
                                                    const Dataset& data, const AttackConfig& attack,
                                                    std::span<const LayerSpec> specs, const TrainConfig& cfg,
                                                    double holdout_fraction) {
  const Dataset rows = data.with_label(kFalse);
  if (rows.size() < 4) throw UsageError("adversarial detection needs at least 4 False rows");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.rng_seed, "detection-split"));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const std::size_t half = order.size() / 2;
  const std::span<const std::size_t> all(order);
  const Dataset plain = rows.subset(all.first(half));
  const Dataset target = rows.subset(all.subspan(half));

  const auto systems = build_systems(space, target);
  const auto per_row = row_systems(target, systems);
  const auto results = craft_batch(PlainView(model), std::span<const ConstraintSystem* const>(per_row), target.z, target.a, attack);

  DetectionExperiment out;
  out.attacked = results.size();
  std::vector<std::size_t> success;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].success) continue;
    if (!space->is_stealthy(results[i].a_hat)) {
      ++out.stealth_violations;
      continue;
    }
    success.push_back(i);
  }
  const std::size_t n = std::min(success.size(), plain.size());
  if (n < 2) throw NumericalError("too few successful attacks to train an adversarial detector");
  Matrix false_z(rows.m(), static_cast<Eigen::Index>(n)), adv_z(rows.m(), static_cast<Eigen::Index>(n));
  out.false_vectors.resize(rows.m(), static_cast<Eigen::Index>(n));
  out.adversarial_vectors.resize(rows.m(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const auto s = static_cast<Eigen::Index>(success[i]);
    false_z.col(c) = plain.z.col(c);
    out.false_vectors.col(c) = plain.a.col(c);
    out.false_k.push_back(plain.k_of(i));
    adv_z.col(c) = target.z.col(s) + results[success[i]].v;
    out.adversarial_vectors.col(c) = results[success[i]].a_hat;
    out.adversarial_k.push_back(target.k_of(success[i]));
  }
  out.detector = train_adversarial_detector(false_z, adv_z, specs, cfg, holdout_fraction);
  Matrix both(rows.m(), 2 * static_cast<Eigen::Index>(n));
  both << false_z, adv_z;
  const auto fp = forward_batch(model, both, Mode::infer);
  std::vector<double> scores(static_cast<std::size_t>(both.cols()));
  std::vector<int> labels(scores.size(), 0);
  for (Eigen::Index c = 0; c < both.cols(); ++c) {
    scores[static_cast<std::size_t>(c)] = fp.logits(kNormal, c) - fp.logits(kFalse, c);
    labels[static_cast<std::size_t>(c)] = c < static_cast<Eigen::Index>(n) ? 0 : 1;
  }
  out.mimic_auc = roc_auc(scores, labels);
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline constexpr std::string_view kReportHeader = "case,k,size,recall,bias_l2,valid_l2,n_success,n_total";
inline constexpr int kReportFormatVersion = 1;

inline std::string report_to_csv(const MetricsReport& report) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    out += r.case_name + ',' + std::to_string(r.k) + ',' + format_double(r.size) + ',' + format_double(r.recall) + ',' +
           (r.bias_l2 ? format_double(*r.bias_l2) : "") + ',' + (r.valid_l2 ? format_double(*r.valid_l2) : "") + ',' +
           std::to_string(r.n_success) + ',' + std::to_string(r.n_total) + '\n';
  }
  return out;
}

/// JSON keeps the full precision of doubles as well; wall-clock figures are
/// grouped under "timing" since they differ between runs.
inline nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"case", r.case_name},
                    {"k", r.k},
                    {"size", r.size},
                    {"recall", r.recall},
                    {"bias_l2", r.bias_l2 ? nlohmann::json(*r.bias_l2) : nlohmann::json(nullptr)},
                    {"valid_l2", r.valid_l2 ? nlohmann::json(*r.valid_l2) : nlohmann::json(nullptr)},
                    {"n_success", r.n_success},
                    {"n_total", r.n_total},
                    {"attacker_view_success", r.attacker_view_success},
                    {"timing", {{"median_seconds", r.median_seconds}}}});
  }
  return {{"format", "fdia-report"}, {"version", kReportFormatVersion}, {"kind", report.kind},
          {"config", report.config},  {"rows", rows}};
}

inline MetricsReport report_from_csv(std::string_view csv) {
  MetricsReport report;
  std::size_t pos = 0, line = 0;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view text = csv.substr(pos, end - pos);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    pos = end + 1;
    ++line;
    if (line == 1) {
      if (text != kReportHeader) throw ParseError("unexpected report header", 1, 1);
      continue;
    }
    if (text.empty()) continue;
    std::vector<std::string_view> cells;
    std::vector<std::size_t> cols;
    for (std::size_t start = 0;;) {
      const auto comma = text.find(',', start);
      cells.push_back(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      cols.push_back(start + 1);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 8) throw ParseError("expected 8 fields, found " + std::to_string(cells.size()), line, 1);
    ReportRow r;
    r.case_name = std::string(cells[0]);
    r.k = static_cast<int>(parse_integer(cells[1], line, cols[1]));
    r.size = parse_double(cells[2], line, cols[2]);
    r.recall = parse_double(cells[3], line, cols[3]);
    if (!cells[4].empty()) r.bias_l2 = parse_double(cells[4], line, cols[4]);
    if (!cells[5].empty()) r.valid_l2 = parse_double(cells[5], line, cols[5]);
    r.n_success = static_cast<std::size_t>(parse_integer(cells[6], line, cols[6]));
    r.n_total = static_cast<std::size_t>(parse_integer(cells[7], line, cols[7]));
    report.rows.push_back(std::move(r));
  }
  return report;
}

inline MetricsReport report_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "fdia-report") throw DataError("not a report document");
    if (doc.at("version").get<int>() > kReportFormatVersion) throw VersionError("report version is newer than supported");
    MetricsReport report;
    report.kind = doc.value("kind", std::string("attack"));
    report.config = doc.value("config", nlohmann::json::object());
    for (const auto& j : doc.at("rows")) {
      ReportRow r;
      r.case_name = j.at("case").get<std::string>();
      r.k = j.at("k").get<int>();
      r.size = j.at("size").get<double>();
      r.recall = j.at("recall").get<double>();
      if (!j.at("bias_l2").is_null()) r.bias_l2 = j.at("bias_l2").get<double>();
      if (!j.at("valid_l2").is_null()) r.valid_l2 = j.at("valid_l2").get<double>();
      r.n_success = j.at("n_success").get<std::size_t>();
      r.n_total = j.at("n_total").get<std::size_t>();
      r.attacker_view_success = j.value("attacker_view_success", std::size_t{0});
      if (j.contains("timing")) r.median_seconds = j["timing"].value("median_seconds", 0.0);
      report.rows.push_back(std::move(r));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

enum class ReportFormat { csv, json };

inline std::string render_report(const MetricsReport& report, ReportFormat format) {
  return format == ReportFormat::csv ? report_to_csv(report) : report_to_json(report).dump(2) + "\n";
}

inline void export_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path) {
  detail::write_file(path, render_report(report, format));
}

inline MetricsReport load_report(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return report_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed report JSON: ") + e.what(), 0, 0);
    }
  }
  return report_from_csv(text);
}

/// Raw vectors for external embedding tools: class,k,v_0..v_{m-1}.
inline std::string vectors_to_csv(const std::vector<std::pair<std::string, int>>& tags, const Matrix& vectors) {
  if (tags.size() != static_cast<std::size_t>(vectors.cols())) throw DimensionError("one tag per vector required");
  std::string out = "class,k";
  for (Eigen::Index j = 0; j < vectors.rows(); ++j) out += ",v_" + std::to_string(j);
  out += '\n';
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    out += tags[static_cast<std::size_t>(c)].first + ',' + std::to_string(tags[static_cast<std::size_t>(c)].second);
    for (Eigen::Index j = 0; j < vectors.rows(); ++j) out += ',' + format_double(vectors(j, c));
    out += '\n';
  }
  return out;
}

}  // namespace fdia
