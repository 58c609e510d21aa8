#pragma once

// Random input padding: the measurement vector is embedded at a random
// offset inside a wider zero vector, at training and at inference time.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fdia/error.hpp"
#include "fdia/mlp.hpp"
#include "fdia/random.hpp"

namespace fdia {

/// [0 x offset] ++ z ++ [0 x (pad_width - offset)]
inline Vector pad_input(const Vector& z, int pad_width, int offset) {
  if (pad_width < 0) throw UsageError("pad width must be nonnegative");
  if (offset < 0 || offset > pad_width)
    throw UsageError("padding offset " + std::to_string(offset) + " outside [0, " + std::to_string(pad_width) + "]");
  Vector out = Vector::Zero(z.size() + pad_width);
  out.segment(offset, z.size()) = z;
  return out;
}

/// Column-wise pad_input with one offset per column.
inline Matrix pad_columns(const Matrix& z, int pad_width, std::span<const int> offsets) {
  if (offsets.size() != static_cast<std::size_t>(z.cols())) throw DimensionError("one padding offset per column required");
  Matrix out = Matrix::Zero(z.rows() + pad_width, z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const int off = offsets[static_cast<std::size_t>(c)];
    if (off < 0 || off > pad_width)
      throw UsageError("padding offset " + std::to_string(off) + " outside [0, " + std::to_string(pad_width) + "]");
    out.col(c).segment(off, z.rows()) = z.col(c);
  }
  return out;
}

/// Scaler (in measurement space) -> zero padding -> inner network of
/// input width P = m + pad_width. Valid offsets are 0..pad_width.
class PaddedModel {
 public:
  PaddedModel() = default;
  PaddedModel(MlpModel inner, InputScaler scaler, int m, int pad_width, std::uint64_t inference_seed)
      : inner_(std::move(inner)), scaler_(std::move(scaler)), m_(m), pad_width_(pad_width), seed_(inference_seed) {
    if (pad_width_ < 0) throw UsageError("pad width must be nonnegative");
    if (inner_.input_dim() != m_ + pad_width_)
      throw DimensionError("inner model expects " + std::to_string(inner_.input_dim()) + " inputs, padded width is " +
                           std::to_string(m_ + pad_width_));
    if (!inner_.scaler.empty()) throw UsageError("the inner model of a padded model must not carry its own scaler");
    if (!scaler_.empty() && scaler_.shift.size() != m_) throw DimensionError("scaler size must equal m");
  }

  const MlpModel& inner() const noexcept { return inner_; }
  MlpModel& inner() noexcept { return inner_; }
  const InputScaler& scaler() const noexcept { return scaler_; }
  int m() const noexcept { return m_; }
  int pad_width() const noexcept { return pad_width_; }
  int offset_count() const noexcept { return pad_width_ + 1; }
  std::uint64_t inference_seed() const noexcept { return seed_; }

  /// Scaled and padded network input for each column of z at the given offsets.
  Matrix network_input(const Matrix& z, std::span<const int> offsets) const {
    if (z.rows() != m_) throw DimensionError("measurement has " + std::to_string(z.rows()) + " entries, expected " + std::to_string(m_));
    return pad_columns(scaler_.apply(z), pad_width_, offsets);
  }

  std::vector<int> predict_at(const Matrix& z, std::span<const int> offsets) const {
    return predict_batch(inner_, network_input(z, offsets));
  }

  int predict_at(const Vector& z, int offset) const {
    const int offsets[] = {offset};
    return predict_at(Matrix(z), offsets).front();
  }

  int draw_offset(Rng& rng) const {
    std::uniform_int_distribution<int> d(0, pad_width_);
    return d(rng);
  }

 private:
  MlpModel inner_;
  InputScaler scaler_;
  int m_ = 0;
  int pad_width_ = 0;
  std::uint64_t seed_ = 0;
};

/// Padded inference with a uniform random offset per call, drawn from a
/// stream seeded by the model's recorded seed (or an explicit one).
class PaddedInference {
 public:
  explicit PaddedInference(const PaddedModel& model) : PaddedInference(model, model.inference_seed()) {}
  PaddedInference(const PaddedModel& model, std::uint64_t seed) : model_(&model), rng_(seed) {}

  struct Result {
    int label;
    int offset;
  };

  Result infer(const Vector& z) {
    const int offset = model_->draw_offset(rng_);
    return {model_->predict_at(z, offset), offset};
  }

  /// One fresh offset per column.
  std::vector<Result> infer_batch(const Matrix& z) {
    std::vector<int> offsets(static_cast<std::size_t>(z.cols()));
    for (auto& o : offsets) o = model_->draw_offset(rng_);
    const auto labels = model_->predict_at(z, offsets);
    std::vector<Result> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = {labels[i], offsets[i]};
    return out;
  }

 private:
  const PaddedModel* model_;
  Rng rng_;
};

inline PaddedInference::Result infer_padded(const PaddedModel& model, const Vector& z, Rng& rng) {
  const int offset = model.draw_offset(rng);
  return {model.predict_at(z, offset), offset};
}

// Wrapper record {m, pad_width, seed} around the inner network's document.

inline nlohmann::json padded_to_json(const PaddedModel& pm) {
  nlohmann::json doc{{"format", "fdia-padded"}, {"version", kModelFormatVersion}, {"m", pm.m()},
                     {"pad_width", pm.pad_width()}, {"seed", pm.inference_seed()}};
  if (!pm.scaler().empty())
    doc["input_scaler"] = {{"shift", detail::vector_json(pm.scaler().shift)}, {"scale", detail::vector_json(pm.scaler().scale)}};
  doc["model"] = model_to_json(pm.inner());
  return doc;
}

inline PaddedModel padded_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string{}) != "fdia-padded") throw DataError("not an fdia-padded model document");
    if (doc.at("version").get<int>() > kModelFormatVersion)
      throw VersionError("padded model format version " + doc.at("version").dump() + " is newer than supported");
    InputScaler scaler;
    if (auto it = doc.find("input_scaler"); it != doc.end() && !it->is_null()) {
      scaler.shift = detail::json_vector(it->at("shift"));
      scaler.scale = detail::json_vector(it->at("scale"));
    }
    return PaddedModel(model_from_json(doc.at("model")), std::move(scaler), doc.at("m").get<int>(),
                       doc.at("pad_width").get<int>(), doc.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt padded model payload: ") + e.what());
  }
}

}  // namespace fdia
