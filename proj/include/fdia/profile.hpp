#pragma once

// JSON experiment configuration shared by the CLI and the test suites.
// Relative case paths resolve against the configuration file's directory.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdia/dataset.hpp"
#include "fdia/defense.hpp"
#include "fdia/experiment.hpp"

namespace fdia {

struct Profile {
  std::filesystem::path case_path;
  std::uint64_t seed = 0;
  GenerationConfig generation;
  double test_fraction = 0.15;
  TrainConfig training;
  std::vector<double> attack_sizes{0.1};
  int max_iters = kDefaultMaxIterations;
  int pad_width = 10;
  std::vector<int> pad_sweep;
  std::vector<double> temperatures{1.0};
  int adversarial_max_iters = 50;
  double detection_holdout = 0.15;
  std::vector<double> alphas{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  nlohmann::json raw = nlohmann::json::object();

  /// Seed of a named sub-experiment, derived from the master seed.
  std::uint64_t stream(std::string_view name, std::uint64_t index = 0) const { return derive_seed(seed, name, index); }

  TrainConfig training_for(std::string_view name) const {
    TrainConfig t = training;
    t.rng_seed = stream(name);
    return t;
  }
};

inline Profile parse_profile(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  Profile p;
  try {
    p.raw = j;
    if (j.contains("case")) {
      p.case_path = j.at("case").get<std::string>();
      if (p.case_path.is_relative() && !base_dir.empty()) p.case_path = base_dir / p.case_path;
    }
    p.seed = j.value("seed", p.seed);
    if (j.contains("generation")) p.generation = j.at("generation").get<GenerationConfig>();
    if (j.contains("split")) p.test_fraction = j.at("split").value("test_fraction", p.test_fraction);
    if (j.contains("training")) {
      const auto& t = j.at("training");
      p.training.learning_rate = t.value("learning_rate", p.training.learning_rate);
      p.training.batch_size = t.value("batch_size", p.training.batch_size);
      p.training.epochs = t.value("epochs", p.training.epochs);
      p.training.dropout_enabled = t.value("dropout", p.training.dropout_enabled);
    }
    if (j.contains("attack")) {
      p.attack_sizes = j.at("attack").value("sizes", p.attack_sizes);
      p.max_iters = j.at("attack").value("max_iters", p.max_iters);
    }
    if (j.contains("padding")) {
      p.pad_width = j.at("padding").value("pad_width", p.pad_width);
      p.pad_sweep = j.at("padding").value("sweep", p.pad_sweep);
    }
    if (j.contains("distillation")) p.temperatures = j.at("distillation").value("temperatures", p.temperatures);
    if (j.contains("adversarial_training")) p.adversarial_max_iters = j.at("adversarial_training").value("max_iters", p.adversarial_max_iters);
    if (j.contains("adversarial_detection")) p.detection_holdout = j.at("adversarial_detection").value("holdout", p.detection_holdout);
    if (j.contains("vanilla")) p.alphas = j.at("vanilla").value("alphas", p.alphas);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed experiment config: ") + e.what());
  }
  if (p.training.batch_size == 0 || !(p.training.learning_rate > 0.0)) throw UsageError("training needs a positive learning rate and batch size");
  if (p.pad_width < 0) throw UsageError("pad width must be nonnegative");
  return p;
}

inline Profile load_profile(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed config " + path.string() + ": " + e.what(), 0, 0);
  }
  return parse_profile(j, path.parent_path());
}

inline ExperimentConfig experiment_config(const Profile& p, std::string_view stream = "attack") {
  ExperimentConfig e;
  e.sizes = p.attack_sizes;
  e.max_iters = p.max_iters;
  e.seed = p.stream(stream);
  return e;
}

/// Generated data of one profile: training set with its split and the
/// per-k test sets.
struct PreparedData {
  GenerationContext context;
  Dataset full;
  Split parts;
  std::vector<Dataset> tests;
};

inline PreparedData prepare_data(const Profile& p) {
  GenerationContext ctx(load_case(p.case_path), p.generation, p.seed);
  Dataset full = build_train_set(ctx);
  Split parts = split(full, p.test_fraction, p.stream("split"));
  auto tests = build_test_sets(ctx, full.mean_l1);
  return {std::move(ctx), std::move(full), std::move(parts), std::move(tests)};
}

}  // namespace fdia
