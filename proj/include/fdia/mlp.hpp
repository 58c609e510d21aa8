#pragma once

// Feed-forward classifier trained with plain mini-batch SGD on categorical
// cross-entropy. Samples are matrix columns throughout.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
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

/// Class indices of the detector.
inline constexpr int kNormal = 0;
inline constexpr int kFalse = 1;

enum class Activation { relu, identity };

/// Dropout, when nonzero, applies to the layer's output.
struct LayerSpec {
  int input_dim = 0;
  int output_dim = 0;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;

  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  LayerSpec spec;
  Matrix weights;  // output_dim x input_dim
  Vector bias;
};

/// Fixed per-feature affine preprocessing x -> (x - shift) / scale.
/// Empty means identity.
struct InputScaler {
  Vector shift;
  Vector scale;

  bool empty() const noexcept { return shift.size() == 0; }

  /// Mean and standard deviation per row of `inputs`; constant features
  /// get scale 1.
  static InputScaler fit(const Matrix& inputs) {
    InputScaler s;
    s.shift = inputs.rowwise().mean();
    const Matrix centered = inputs.colwise() - s.shift;
    s.scale = (centered.array().square().rowwise().sum() / static_cast<double>(inputs.cols())).sqrt();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i)
      if (!(s.scale[i] > 1e-12)) s.scale[i] = 1.0;
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (empty()) return x;
    return (x.colwise() - shift).array().colwise() / scale.array();
  }
};

class MlpModel {
 public:
  std::vector<DenseLayer> layers;
  double temperature = 1.0;
  InputScaler scaler;

  int input_dim() const { return layers.empty() ? 0 : layers.front().spec.input_dim; }
  int class_count() const { return layers.empty() ? 0 : layers.back().spec.output_dim; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) out.push_back(l.spec);
    return out;
  }
};

/// input -> 128 -> 64 -> 16 (ReLU) -> dropout 0.25 -> 2-way softmax.
inline std::vector<LayerSpec> detector_layers(int input_dim) {
  return {{input_dim, 128, Activation::relu, 0.0},
          {128, 64, Activation::relu, 0.0},
          {64, 16, Activation::relu, 0.25},
          {16, 2, Activation::identity, 0.0}};
}

inline void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw UsageError("a model needs at least one layer");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.input_dim <= 0 || s.output_dim <= 0) throw DimensionError("layer " + std::to_string(i) + " has a nonpositive dimension");
    if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0))
      throw UsageError("layer " + std::to_string(i) + " dropout rate must lie in [0, 1)");
    if (i > 0 && specs[i - 1].output_dim != s.input_dim)
      throw DimensionError("layer " + std::to_string(i) + " expects " + std::to_string(s.input_dim) +
                           " inputs, previous layer produces " + std::to_string(specs[i - 1].output_dim));
  }
}

/// Glorot-uniform weights, zero biases.
inline MlpModel init_model(std::span<const LayerSpec> specs, double temperature, std::uint64_t seed) {
  validate_specs(specs);
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  Rng rng(seed);
  MlpModel model;
  model.temperature = temperature;
  for (const auto& s : specs) {
    const double bound = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{s, Matrix(s.output_dim, s.input_dim), Vector::Zero(s.output_dim)};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = u(rng);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

enum class Mode { train, infer };

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardPass {
  std::vector<Matrix> inputs;  // input of each layer (after the scaler)
  std::vector<Matrix> pre;     // pre-activations
  std::vector<Matrix> masks;   // inverted-dropout masks; empty when inactive
  Matrix logits;
  Matrix probabilities;
  double temperature = 1.0;
};

namespace detail {

inline void softmax_columns(const Matrix& logits, double temperature, Matrix& out) {
  out.resize(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const auto col = logits.col(c) / temperature;
    const double mx = col.maxCoeff();
    auto e = (col.array() - mx).exp();
    out.col(c) = e / e.sum();
  }
}

inline void check_input(const MlpModel& model, const Matrix& inputs) {
  if (model.layers.empty()) throw UsageError("model has no layers");
  if (inputs.rows() != model.input_dim())
    throw DimensionError("input has " + std::to_string(inputs.rows()) + " features, model expects " +
                         std::to_string(model.input_dim()));
  if (!inputs.allFinite()) throw DataError("non-finite model input");
}

}  // namespace detail

/// Batched forward pass. Dropout is active only in train mode and draws
/// from `rng`. `temperature` overrides the model's softmax divisor.
inline ForwardPass forward_batch(const MlpModel& model, const Matrix& inputs, Mode mode, Rng* rng = nullptr,
                                 std::optional<double> temperature = std::nullopt) {
  detail::check_input(model, inputs);
  ForwardPass fp;
  fp.temperature = temperature.value_or(model.temperature);
  if (!(fp.temperature > 0.0)) throw UsageError("temperature must be positive");
  const std::size_t depth = model.layers.size();
  fp.inputs.resize(depth);
  fp.pre.resize(depth);
  fp.masks.resize(depth);
  Matrix x = model.scaler.apply(inputs);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = model.layers[l];
    fp.pre[l].noalias() = layer.weights * x;
    fp.pre[l].colwise() += layer.bias;
    fp.inputs[l] = std::move(x);
    x = layer.spec.activation == Activation::relu ? Matrix(fp.pre[l].cwiseMax(0.0)) : fp.pre[l];
    if (mode == Mode::train && layer.spec.dropout_rate > 0.0) {
      if (rng == nullptr) throw UsageError("train-mode dropout needs a random source");
      const double keep = 1.0 - layer.spec.dropout_rate;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Matrix mask(x.rows(), x.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = u(*rng) < keep ? 1.0 / keep : 0.0;
      x.array() *= mask.array();
      fp.masks[l] = std::move(mask);
    }
  }
  fp.logits = std::move(x);
  detail::softmax_columns(fp.logits, fp.temperature, fp.probabilities);
  return fp;
}

struct ForwardResult {
  Vector probabilities;
  ForwardPass cache;
};

inline ForwardResult forward(const MlpModel& model, const Vector& input, Mode mode, std::uint64_t seed = 0) {
  Rng rng(seed);
  ForwardResult r;
  r.cache = forward_batch(model, input, mode, &rng);
  r.probabilities = r.cache.probabilities.col(0);
  return r;
}

/// Argmax class per column, inference mode.
inline std::vector<int> predict_batch(const MlpModel& model, const Matrix& inputs) {
  const auto fp = forward_batch(model, inputs, Mode::infer);
  std::vector<int> out(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    Eigen::Index best = 0;
    fp.logits.col(c).maxCoeff(&best);
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

inline int predict(const MlpModel& model, const Vector& input) { return predict_batch(model, input).front(); }

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix inputs;  // d loss / d raw input, one column per sample
};

/// Mean cross-entropy of the batch against target distributions (columns).
inline double cross_entropy(const ForwardPass& fp, const Matrix& targets) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    const auto z = fp.logits.col(c) / fp.temperature;
    const double mx = z.maxCoeff();
    const double lse = mx + std::log((z.array() - mx).exp().sum());
    total += -(targets.col(c).array() * (z.array() - lse)).sum();
  }
  return total / static_cast<double>(targets.cols());
}

/// Backpropagates d loss / d logits (one column per sample, already divided
/// by the batch size) through every layer.
inline Gradients backpropagate(const MlpModel& model, const ForwardPass& fp, Matrix delta, bool want_weights,
                               bool want_input) {
  const std::size_t depth = model.layers.size();
  Gradients g;
  if (want_weights) {
    g.weights.resize(depth);
    g.biases.resize(depth);
  }
  for (std::size_t i = depth; i-- > 0;) {
    const auto& layer = model.layers[i];
    // delta currently holds d loss / d (layer output after dropout).
    if (fp.masks[i].size() != 0) delta.array() *= fp.masks[i].array();
    if (layer.spec.activation == Activation::relu) delta.array() *= (fp.pre[i].array() > 0.0).cast<double>();
    if (want_weights) {
      g.weights[i].noalias() = delta * fp.inputs[i].transpose();
      g.biases[i] = delta.rowwise().sum();
    }
    if (i > 0 || want_input) {
      Matrix next;
      next.noalias() = layer.weights.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (want_input) {
    g.inputs = std::move(delta);
    if (!model.scaler.empty()) g.inputs.array().colwise() /= model.scaler.scale.array();
  }
  return g;
}

/// Backpropagates the mean batch cross-entropy. For one-hot target columns
/// the logit gradient of the true class is formed as minus the sum of the
/// other probabilities so saturated softmax outputs keep their gradient.
/// Input gradients are per sample, not divided by the batch size.
inline Gradients backward(const MlpModel& model, const ForwardPass& fp, const Matrix& targets, bool want_weights = true,
                          bool want_input = false) {
  const auto batch = static_cast<double>(targets.cols());
  Matrix delta = fp.probabilities - targets;
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    Eigen::Index hot = 0;
    if (targets.col(c).maxCoeff(&hot) == 1.0 && targets.col(c).sum() == 1.0)
      delta(hot, c) = -(fp.probabilities.col(c).sum() - fp.probabilities(hot, c));
  }
  delta /= fp.temperature * batch;
  auto g = backpropagate(model, fp, std::move(delta), want_weights, want_input);
  if (want_input) g.inputs *= batch;
  return g;
}

inline Matrix one_hot(std::span<const int> labels, int classes) {
  Matrix t = Matrix::Zero(classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw DataError("label " + std::to_string(labels[i]) + " outside {0, .., " + std::to_string(classes - 1) + "}");
    t(labels[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return t;
}

/// Cross-entropy of a single input against `label`, inference mode.
inline double loss(const MlpModel& model, const Vector& input, int label, double temperature = 1.0) {
  const int labels[] = {label};
  return cross_entropy(forward_batch(model, input, Mode::infer, nullptr, temperature), one_hot(labels, model.class_count()));
}

/// d loss(input, label) / d input, inference mode, softmax at `temperature`.
inline Vector input_gradient(const MlpModel& model, const Vector& input, int label, double temperature = 1.0) {
  const auto fp = forward_batch(model, input, Mode::infer, nullptr, temperature);
  const int labels[] = {label};
  return backward(model, fp, one_hot(labels, model.class_count()), false, true).inputs.col(0);
}

/// Per-column input gradients and argmax predictions for one label.
struct GradientProbe {
  std::vector<int> predicted;
  Matrix gradients;
};

/// With `direction_only`, column c of the gradients is the exact input
/// gradient times a positive per-sample factor, chosen so the logit delta
/// has unit max-norm. The logit delta is then formed from log-space
/// differences and cannot underflow when the softmax saturates.
inline GradientProbe probe_batch(const MlpModel& model, const Matrix& inputs, int label, double temperature = 1.0,
                                 bool direction_only = false) {
  const auto fp = forward_batch(model, inputs, Mode::infer, nullptr, temperature);
  GradientProbe p;
  p.predicted.resize(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    Eigen::Index best = 0;
    fp.logits.col(c).maxCoeff(&best);
    p.predicted[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  const std::vector<int> labels(static_cast<std::size_t>(inputs.cols()), label);
  if (!direction_only) {
    p.gradients = backward(model, fp, one_hot(labels, model.class_count()), false, true).inputs;
    return p;
  }
  if (label < 0 || label >= model.class_count()) throw DataError("label outside the model's classes");
  // Other classes get their softmax restricted to j != label; the label
  // itself gets -1. This is (p - y) / (1 - p_label).
  Matrix delta(fp.logits.rows(), fp.logits.cols());
  for (Eigen::Index c = 0; c < fp.logits.cols(); ++c) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < delta.rows(); ++j)
      if (j != label) mx = std::max(mx, fp.logits(j, c) / fp.temperature);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < delta.rows(); ++j) {
      delta(j, c) = j == label ? 0.0 : std::exp(fp.logits(j, c) / fp.temperature - mx);
      sum += delta(j, c);
    }
    delta.col(c) /= sum;
    delta(label, c) = -1.0;
  }
  p.gradients = backpropagate(model, fp, std::move(delta), false, true).inputs;
  return p;
}

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t rng_seed = 0;
  bool dropout_enabled = true;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;  // including augmented ones
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  double seconds = 0.0;
};

/// One mini-batch as seen by the optimizer. Augmenters may rewrite inputs
/// (e.g. change their dimension) or append columns.
struct Batch {
  Matrix inputs;
  Matrix targets;
  std::vector<std::size_t> indices;  // dataset columns, before augmentation
};

using BatchAugmenter = std::function<void(Batch&, const MlpModel&, Rng&)>;

/// Mini-batch SGD on categorical cross-entropy against target
/// distributions (one column per sample). Shuffles every epoch.
inline TrainingLog train(MlpModel& model, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg,
                         const BatchAugmenter& augmenter = {}) {
  if (inputs.cols() == 0) throw UsageError("training set is empty");
  if (targets.cols() != inputs.cols() || targets.rows() != model.class_count())
    throw DimensionError("targets must be " + std::to_string(model.class_count()) + " x " + std::to_string(inputs.cols()));
  if (!(cfg.learning_rate >= 0.0)) throw UsageError("learning rate must be nonnegative");
  if (cfg.batch_size == 0) throw UsageError("batch size must be at least 1");

  const auto start = std::chrono::steady_clock::now();
  Rng rng(cfg.rng_seed);
  const auto n = static_cast<std::size_t>(inputs.cols());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainingLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      Batch batch;
      batch.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
      batch.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(end - begin));
      batch.targets.resize(targets.rows(), static_cast<Eigen::Index>(end - begin));
      for (std::size_t j = 0; j < batch.indices.size(); ++j) {
        batch.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(batch.indices[j]));
        batch.targets.col(static_cast<Eigen::Index>(j)) = targets.col(static_cast<Eigen::Index>(batch.indices[j]));
      }
      if (augmenter) augmenter(batch, model, rng);

      const auto fp = forward_batch(model, batch.inputs, cfg.dropout_enabled ? Mode::train : Mode::infer, &rng);
      const auto g = backward(model, fp, batch.targets);
      const auto cols = static_cast<std::size_t>(batch.inputs.cols());
      loss_sum += cross_entropy(fp, batch.targets) * static_cast<double>(cols);
      for (Eigen::Index c = 0; c < batch.inputs.cols(); ++c) {
        Eigen::Index p = 0, t = 0;
        fp.probabilities.col(c).maxCoeff(&p);
        batch.targets.col(c).maxCoeff(&t);
        correct += p == t ? 1 : 0;
      }
      seen += cols;
      if (cfg.learning_rate > 0.0) {
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
          model.layers[l].weights.noalias() -= cfg.learning_rate * g.weights[l];
          model.layers[l].bias.noalias() -= cfg.learning_rate * g.biases[l];
        }
      }
    }
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(seen), static_cast<double>(correct) / static_cast<double>(seen), seen});
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

/// Hard labels 0 = Normal, 1 = False.
inline TrainingLog train(MlpModel& model, const Matrix& inputs, std::span<const int> labels, const TrainConfig& cfg,
                         const BatchAugmenter& augmenter = {}) {
  if (inputs.cols() == 0) throw UsageError("training set is empty");
  if (labels.size() != static_cast<std::size_t>(inputs.cols())) throw DimensionError("one label per input column required");
  return train(model, inputs, one_hot(labels, model.class_count()), cfg, augmenter);
}

struct Evaluation {
  double accuracy = 0.0;
  double recall = 0.0;     // of the False class
  double precision = 0.0;  // of the False class; 0 when nothing is predicted False
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [actual][predicted]
  std::size_t total = 0;
};

inline Evaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> labels) {
  if (labels.empty()) throw UsageError("cannot evaluate on an empty set");
  if (predicted.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  Evaluation e;
  e.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 1 || predicted[i] < 0 || predicted[i] > 1) throw DataError("labels must be 0 or 1");
    ++e.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predicted[i])];
  }
  const double tp = static_cast<double>(e.confusion[1][1]);
  const double fn = static_cast<double>(e.confusion[1][0]);
  const double fp = static_cast<double>(e.confusion[0][1]);
  e.accuracy = static_cast<double>(e.confusion[0][0] + e.confusion[1][1]) / static_cast<double>(e.total);
  e.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  e.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  return e;
}

inline Evaluation evaluate(const MlpModel& model, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.cols() == 0) throw UsageError("cannot evaluate on an empty set");
  return evaluate_predictions(predict_batch(model, inputs), labels);
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json model_to_json(const MlpModel& model) {
  nlohmann::json doc;
  doc["format"] = "fdia-mlp";
  doc["version"] = kModelFormatVersion;
  doc["temperature"] = model.temperature;
  if (!model.scaler.empty())
    doc["input_scaler"] = {{"shift", detail::vector_json(model.scaler.shift)}, {"scale", detail::vector_json(model.scaler.scale)}};
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (const auto& l : model.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"in", l.spec.input_dim},
                      {"out", l.spec.output_dim},
                      {"activation", l.spec.activation == Activation::relu ? "relu" : "identity"},
                      {"dropout", l.spec.dropout_rate},
                      {"weights", std::move(w)},
                      {"bias", detail::vector_json(l.bias)}});
  }
  return doc;
}

inline MlpModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string{}) != "fdia-mlp") throw DataError("not an fdia-mlp model document");
    const int version = doc.at("version").get<int>();
    if (version > kModelFormatVersion)
      throw VersionError("model format version " + std::to_string(version) + " is newer than supported version " +
                         std::to_string(kModelFormatVersion));
    MlpModel model;
    model.temperature = doc.at("temperature").get<double>();
    if (auto it = doc.find("input_scaler"); it != doc.end() && !it->is_null()) {
      model.scaler.shift = detail::json_vector(it->at("shift"));
      model.scaler.scale = detail::json_vector(it->at("scale"));
    }
    std::vector<LayerSpec> specs;
    for (const auto& l : doc.at("layers")) {
      const auto act = l.at("activation").get<std::string>();
      if (act != "relu" && act != "identity") throw DataError("unknown activation '" + act + "'");
      specs.push_back({l.at("in").get<int>(), l.at("out").get<int>(), act == "relu" ? Activation::relu : Activation::identity,
                       l.at("dropout").get<double>()});
    }
    validate_specs(specs);
    std::size_t i = 0;
    for (const auto& l : doc.at("layers")) {
      const auto& s = specs[i++];
      const auto w = l.at("weights").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(s.input_dim) * static_cast<std::size_t>(s.output_dim))
        throw DataError("weight count does not match layer dimensions");
      DenseLayer layer{s, Matrix(s.output_dim, s.input_dim), detail::json_vector(l.at("bias"))};
      if (layer.bias.size() != s.output_dim) throw DataError("bias count does not match layer dimensions");
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = w[static_cast<std::size_t>(r * layer.weights.cols() + c)];
      model.layers.push_back(std::move(layer));
    }
    if (!model.scaler.empty() && (model.scaler.shift.size() != model.input_dim() || model.scaler.scale.size() != model.input_dim()))
      throw DataError("input scaler size does not match the model input");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt model payload: ") + e.what());
  }
}

inline std::string save_model(const MlpModel& model) { return model_to_json(model).dump(); }

inline MlpModel load_model(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("corrupt model payload: ") + e.what());
  }
  return model_from_json(doc);
}

}  // namespace fdia
