#pragma once

// Detector training variants: plain, random input padding, defensive
// distillation, adversarial training and an auxiliary adversarial detector.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "fdia/attack.hpp"
#include "fdia/constraints.hpp"
#include "fdia/mlp.hpp"
#include "fdia/padding.hpp"
#include "fdia/random.hpp"

namespace fdia {

struct TrainedModel {
  MlpModel model;
  TrainingLog log;
};

/// Glorot init from derive_seed(cfg.rng_seed, "init"), scaler fitted on the
/// training inputs, then plain SGD.
inline TrainedModel train_detector(const Matrix& inputs, std::span<const int> labels, std::span<const LayerSpec> specs,
                                   const TrainConfig& cfg, double temperature = 1.0) {
  if (inputs.cols() == 0) throw UsageError("training set is empty");
  TrainedModel out{init_model(specs, temperature, derive_seed(cfg.rng_seed, "init")), {}};
  out.model.scaler = InputScaler::fit(inputs);
  out.log = train(out.model, inputs, labels, cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Random input padding

/// Pads each batch column at a fresh uniform offset. Every sample appears
/// once per epoch, so offsets are re-drawn every epoch.
class PaddingAugmenter {
 public:
  explicit PaddingAugmenter(int pad_width) : pad_width_(pad_width), histogram_(static_cast<std::size_t>(pad_width) + 1, 0) {}

  void operator()(Batch& batch, const MlpModel&, Rng& rng) {
    std::uniform_int_distribution<int> d(0, pad_width_);
    std::vector<int> offsets(static_cast<std::size_t>(batch.inputs.cols()));
    for (auto& o : offsets) {
      o = d(rng);
      ++histogram_[static_cast<std::size_t>(o)];
    }
    batch.inputs = pad_columns(batch.inputs, pad_width_, offsets);
  }

  const std::vector<std::size_t>& histogram() const noexcept { return histogram_; }

 private:
  int pad_width_;
  std::vector<std::size_t> histogram_;
};

struct PaddedTraining {
  PaddedModel model;
  TrainingLog log;
  std::vector<std::size_t> offset_histogram;  // offsets drawn during training
};

/// specs[0].input_dim must equal m + pad_width. With pad_width = 0 this
/// reproduces train_detector exactly for the same configuration.
inline PaddedTraining train_padded(const Matrix& inputs, std::span<const int> labels, int pad_width,
                                   std::span<const LayerSpec> specs, const TrainConfig& cfg) {
  if (inputs.cols() == 0) throw UsageError("training set is empty");
  if (specs.empty() || specs.front().input_dim != inputs.rows() + pad_width)
    throw DimensionError("first layer must take m + pad_width = " + std::to_string(inputs.rows() + pad_width) + " inputs");
  InputScaler scaler = InputScaler::fit(inputs);
  MlpModel inner = init_model(specs, 1.0, derive_seed(cfg.rng_seed, "init"));
  const Matrix scaled = scaler.apply(inputs);
  PaddingAugmenter augmenter(pad_width);
  TrainingLog log;
  if (pad_width == 0) {
    log = train(inner, scaled, labels, cfg);
  } else {
    log = train(inner, scaled, labels, cfg, std::ref(augmenter));
  }
  PaddedModel pm(std::move(inner), std::move(scaler), static_cast<int>(inputs.rows()), pad_width,
                 derive_seed(cfg.rng_seed, "padded-inference"));
  return {std::move(pm), std::move(log), augmenter.histogram()};
}

/// Accuracy/recall of a padded detector with one fresh offset per sample.
inline Evaluation evaluate_padded(const PaddedModel& model, const Matrix& inputs, std::span<const int> labels,
                                  std::uint64_t seed) {
  PaddedInference inference(model, seed);
  const auto results = inference.infer_batch(inputs);
  std::vector<int> predicted(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) predicted[i] = results[i].label;
  return evaluate_predictions(predicted, labels);
}

// ---------------------------------------------------------------------------
// Defensive distillation

struct DistillationConfig {
  double temperature = 1.0;

  void validate() const {
    if (!(temperature > 0.0)) throw UsageError("distillation temperature must be positive");
  }
};

struct DistillationResult {
  MlpModel teacher;
  MlpModel student;  // trained at T; attacked and evaluated at temperature 1
  TrainingLog teacher_log;
  TrainingLog student_log;
};

/// Teacher trained at temperature T on hard labels, student (same
/// architecture, independent init) trained at T on the teacher's soft labels.
inline DistillationResult distill(const Matrix& inputs, std::span<const int> labels, std::span<const LayerSpec> specs,
                                  const TrainConfig& cfg, const DistillationConfig& dcfg) {
  dcfg.validate();
  DistillationResult out;
  out.teacher = init_model(specs, dcfg.temperature, derive_seed(cfg.rng_seed, "teacher-init"));
  out.teacher.scaler = InputScaler::fit(inputs);
  out.teacher_log = train(out.teacher, inputs, labels, cfg);

  const Matrix soft = forward_batch(out.teacher, inputs, Mode::infer).probabilities;

  out.student = init_model(specs, dcfg.temperature, derive_seed(cfg.rng_seed, "student-init"));
  out.student.scaler = out.teacher.scaler;
  TrainConfig student_cfg = cfg;
  student_cfg.rng_seed = derive_seed(cfg.rng_seed, "student-train");
  out.student_log = train(out.student, inputs, soft, student_cfg);
  return out;
}

/// Mean L2 norm of d loss / d input over a set, at the given temperature.
inline double input_sensitivity(const MlpModel& model, const Matrix& inputs, std::span<const int> labels,
                                double temperature = 1.0) {
  if (inputs.cols() == 0) throw UsageError("cannot measure sensitivity on an empty set");
  const auto fp = forward_batch(model, inputs, Mode::infer, nullptr, temperature);
  const auto g = backward(model, fp, one_hot(labels, model.class_count()), false, true);
  return g.inputs.colwise().norm().mean();
}

// ---------------------------------------------------------------------------
// Adversarial training

struct AdversarialTrainingStats {
  std::size_t generated = 0;  // appended adversarial samples
  std::size_t skipped = 0;    // attacks that did not fool the current model
  std::size_t rejected = 0;   // outputs failing the stealth check (expected 0)
};

struct AdversarialTraining {
  MlpModel model;
  TrainingLog log;
  AdversarialTrainingStats stats;
};

inline AttackConfig default_adversarial_training_attack() {
  AttackConfig cfg;
  cfg.max_iters = 50;
  return cfg;
}

/// Per batch: attack the batch's False samples against the current weights
/// and append every sample that fools the model, labeled False.
/// systems[i] is the constraint system of column i (nullptr for Normal
/// samples) and injections.col(i) its injected vector a.
class AdversarialAugmenter {
 public:
  AdversarialAugmenter(std::span<const ConstraintSystem* const> systems, const Matrix& injections, AttackConfig cfg,
                       AdversarialTrainingStats& stats)
      : systems_(systems), injections_(&injections), cfg_(cfg), stats_(&stats) {}

  void operator()(Batch& batch, const MlpModel& model, Rng&) {
    std::vector<Eigen::Index> picked;
    for (std::size_t j = 0; j < batch.indices.size(); ++j)
      if (systems_[batch.indices[j]] != nullptr && batch.targets(kFalse, static_cast<Eigen::Index>(j)) == 1.0)
        picked.push_back(static_cast<Eigen::Index>(j));
    if (picked.empty()) return;
    const auto m = batch.inputs.rows();
    Matrix z_a(m, static_cast<Eigen::Index>(picked.size()));
    Matrix a(m, static_cast<Eigen::Index>(picked.size()));
    std::vector<const ConstraintSystem*> systems(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const auto idx = batch.indices[static_cast<std::size_t>(picked[i])];
      z_a.col(static_cast<Eigen::Index>(i)) = batch.inputs.col(picked[i]);
      a.col(static_cast<Eigen::Index>(i)) = injections_->col(static_cast<Eigen::Index>(idx));
      systems[i] = systems_[idx];
    }
    const auto results = craft_batch(PlainView(model), std::span<const ConstraintSystem* const>(systems), z_a, a, cfg_);
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (!r.success || r.iterations == 0) {
        ++stats_->skipped;
        continue;
      }
      if (!systems[i]->space().is_stealthy(r.a_hat)) {
        ++stats_->rejected;
        continue;
      }
      keep.push_back(static_cast<Eigen::Index>(i));
    }
    if (keep.empty()) return;
    const auto old = batch.inputs.cols();
    const auto extra = static_cast<Eigen::Index>(keep.size());
    batch.inputs.conservativeResize(Eigen::NoChange, old + extra);
    batch.targets.conservativeResize(Eigen::NoChange, old + extra);
    for (Eigen::Index i = 0; i < extra; ++i) {
      const auto src = keep[static_cast<std::size_t>(i)];
      batch.inputs.col(old + i) = z_a.col(src) + results[static_cast<std::size_t>(src)].v;
      batch.targets.col(old + i).setZero();
      batch.targets(kFalse, old + i) = 1.0;
    }
    stats_->generated += keep.size();
  }

 private:
  std::span<const ConstraintSystem* const> systems_;
  const Matrix* injections_;
  AttackConfig cfg_;
  AdversarialTrainingStats* stats_;
};

/// Same initialization and data order as train_detector; with
/// `augment == false` the result is identical to it.
inline AdversarialTraining adversarial_training(const Matrix& inputs, std::span<const int> labels,
                                                std::span<const ConstraintSystem* const> systems, const Matrix& injections,
                                                std::span<const LayerSpec> specs, const TrainConfig& cfg,
                                                const AttackConfig& attack_cfg = default_adversarial_training_attack(),
                                                bool augment = true) {
  if (systems.size() != static_cast<std::size_t>(inputs.cols()) || injections.cols() != inputs.cols() ||
      injections.rows() != inputs.rows())
    throw DimensionError("adversarial training needs a constraint system slot and an injection per sample");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == kFalse && systems[i] == nullptr)
      throw DataError("False sample " + std::to_string(i) + " carries no attack scenario");
  attack_cfg.validate();
  AdversarialTraining out{init_model(specs, 1.0, derive_seed(cfg.rng_seed, "init")), {}, {}};
  out.model.scaler = InputScaler::fit(inputs);
  if (augment) {
    AdversarialAugmenter aug(systems, injections, attack_cfg, out.stats);
    out.log = train(out.model, inputs, labels, cfg, std::ref(aug));
  } else {
    out.log = train(out.model, inputs, labels, cfg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adversarial detection

/// Area under the ROC curve of `scores` for positives (label 1), with ties
/// counted half (Mann-Whitney U).
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("one score per label required");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j + 1);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) rank_sum += avg_rank;
    i = j;
  }
  for (int l : labels) pos += l == 1 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UsageError("AUC needs both classes");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

struct AdversarialDetector {
  MlpModel model;
  TrainingLog log;
  Evaluation holdout;  // class 1 = adversarial
  double auc = 0.5;
  std::size_t holdout_size = 0;
};

/// Binary classifier separating false (label 0) from adversarial (label 1)
/// measurements, scored on a random held-out fraction.
inline AdversarialDetector train_adversarial_detector(const Matrix& false_samples, const Matrix& adversarial_samples,
                                                      std::span<const LayerSpec> specs, const TrainConfig& cfg,
                                                      double holdout_fraction = 0.15) {
  if (false_samples.cols() == 0 || adversarial_samples.cols() == 0)
    throw UsageError("adversarial detection needs samples of both classes");
  if (false_samples.rows() != adversarial_samples.rows()) throw DimensionError("sample dimensions differ");
  const auto n = static_cast<std::size_t>(false_samples.cols() + adversarial_samples.cols());
  Matrix all(false_samples.rows(), static_cast<Eigen::Index>(n));
  all << false_samples, adversarial_samples;
  std::vector<int> labels(n, 0);
  std::fill(labels.begin() + false_samples.cols(), labels.end(), 1);

  Rng rng(derive_seed(cfg.rng_seed, "holdout"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(holdout_fraction * static_cast<double>(n)));
  if (n_test >= n) throw UsageError("hold-out fraction leaves no training data");
  Matrix train_x(all.rows(), static_cast<Eigen::Index>(n - n_test)), test_x(all.rows(), static_cast<Eigen::Index>(n_test));
  std::vector<int> train_y, test_y;
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(order[i]);
    if (i < n_test) {
      test_x.col(static_cast<Eigen::Index>(i)) = all.col(src);
      test_y.push_back(labels[order[i]]);
    } else {
      train_x.col(static_cast<Eigen::Index>(i - n_test)) = all.col(src);
      train_y.push_back(labels[order[i]]);
    }
  }

  auto trained = train_detector(train_x, train_y, specs, cfg);
  AdversarialDetector out;
  out.model = std::move(trained.model);
  out.log = std::move(trained.log);
  out.holdout = evaluate(out.model, test_x, test_y);
  // Logit gaps rather than probabilities: saturated softmax outputs tie.
  const Matrix logits = forward_batch(out.model, test_x, Mode::infer).logits;
  std::vector<double> scores(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) scores[static_cast<std::size_t>(c)] = logits(1, c) - logits(0, c);
  out.auc = test_y.end() == std::find(test_y.begin(), test_y.end(), 1) || test_y.end() == std::find(test_y.begin(), test_y.end(), 0)
                ? 0.5
                : roc_auc(scores, test_y);
  out.holdout_size = n_test;
  return out;
}

}  // namespace fdia
