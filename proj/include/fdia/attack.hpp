#pragma once

// Constrained white-box attack on a neural FDIA detector. Each step ascends
// the loss of the False label, keeps only the compromised channels, maps the
// step onto the stealth solution space and rescales it so that its largest
// entry equals the configured step size. The loop ends as soon as the
// detector reports Normal or the iteration cap is hit.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdia/constraints.hpp"
#include "fdia/error.hpp"
#include "fdia/mlp.hpp"
#include "fdia/padding.hpp"

namespace fdia {

inline constexpr int kDefaultMaxIterations = 1000;

struct AttackConfig {
  double size = 0.1;  // infinity-norm of every step
  int max_iters = kDefaultMaxIterations;
  std::optional<int> padding_offset;

  void validate() const {
    if (!(size > 0.0)) throw UsageError("attack step size must be positive");
    if (max_iters < 1) throw UsageError("attack iteration cap must be at least 1");
  }
};

enum class AttackStatus {
  fooled,           // detector reports Normal at the attacker's view
  iteration_cap,    // still detected after max_iters steps
  no_descent,       // projected gradient vanished; no direction to move in
};

inline std::string_view to_string(AttackStatus s) {
  switch (s) {
    case AttackStatus::fooled: return "fooled";
    case AttackStatus::iteration_cap: return "iteration_cap";
    case AttackStatus::no_descent: return "no_descent";
  }
  return "unknown";
}

struct AdversarialResult {
  Vector v;      // perturbation, zero outside C
  Vector a_hat;  // a + v
  bool success = false;
  int iterations = 0;
  AttackStatus status = AttackStatus::iteration_cap;
};

/// Detector seen through its exact network at softmax temperature 1 (or
/// the given override). Probes return gradient directions; the step rule
/// rescales them anyway.
class PlainView {
 public:
  explicit PlainView(const MlpModel& model, double gradient_temperature = 1.0)
      : model_(&model), temperature_(gradient_temperature) {}

  Eigen::Index measurement_dim() const { return model_->input_dim(); }

  GradientProbe probe(const Matrix& z, int label) const { return probe_batch(*model_, z, label, temperature_, true); }

 private:
  const MlpModel* model_;
  double temperature_;
};

/// Padded detector with the padding offset pinned to one value.
/// Gradients are returned in measurement space.
class PaddedView {
 public:
  PaddedView(const PaddedModel& model, int offset, double gradient_temperature = 1.0)
      : model_(&model), offset_(offset), temperature_(gradient_temperature) {
    if (offset < 0 || offset > model.pad_width())
      throw UsageError("padding offset " + std::to_string(offset) + " outside [0, " + std::to_string(model.pad_width()) + "]");
  }

  Eigen::Index measurement_dim() const { return model_->m(); }
  int offset() const noexcept { return offset_; }

  GradientProbe probe(const Matrix& z, int label) const {
    const std::vector<int> offsets(static_cast<std::size_t>(z.cols()), offset_);
    auto p = probe_batch(model_->inner(), model_->network_input(z, offsets), label, temperature_, true);
    Matrix g = p.gradients.middleRows(offset_, model_->m());
    if (!model_->scaler().empty()) g.array().colwise() /= model_->scaler().scale.array();
    p.gradients = std::move(g);
    return p;
  }

 private:
  const PaddedModel* model_;
  int offset_;
  double temperature_;
};

/// Runs the attack on every column of z_a at once. systems[i] must describe
/// the scenario that produced column i; a holds the injected vectors.
template <class View>
std::vector<AdversarialResult> craft_batch(const View& view, std::span<const ConstraintSystem* const> systems,
                                           const Matrix& z_a, const Matrix& a, const AttackConfig& cfg) {
  cfg.validate();
  const Eigen::Index m = view.measurement_dim();
  const auto count = static_cast<std::size_t>(z_a.cols());
  if (z_a.rows() != m || a.rows() != m || a.cols() != z_a.cols())
    throw DimensionError("attack inputs must be " + std::to_string(m) + " x " + std::to_string(count));
  if (systems.size() != count) throw DimensionError("one constraint system per attacked sample required");
  for (const auto* cs : systems)
    if (cs == nullptr || cs->space().m() != m) throw DimensionError("constraint system does not match the measurement size");

  std::vector<AdversarialResult> results(count);
  Matrix v = Matrix::Zero(m, z_a.cols());
  std::vector<std::size_t> active(count);
  for (std::size_t i = 0; i < count; ++i) active[i] = i;

  while (!active.empty()) {
    Matrix x(m, static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(active[i]);
      x.col(static_cast<Eigen::Index>(i)) = z_a.col(c) + v.col(c);
    }
    const auto probe = view.probe(x, kFalse);
    std::vector<std::size_t> still;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t s = active[i];
      auto& r = results[s];
      if (probe.predicted[i] == kNormal) {
        r.status = AttackStatus::fooled;
        continue;
      }
      if (r.iterations == cfg.max_iters) {
        r.status = AttackStatus::iteration_cap;
        continue;
      }
      const ConstraintSystem& cs = *systems[s];
      const Vector step = cs.project_restricted(cs.gather(probe.gradients.col(static_cast<Eigen::Index>(i))));
      const double largest = step.size() ? step.cwiseAbs().maxCoeff() : 0.0;
      const double eps = cfg.size / largest;
      if (!(largest > 0.0) || !std::isfinite(eps) || !step.allFinite()) {
        r.status = AttackStatus::no_descent;
        continue;
      }
      v.col(static_cast<Eigen::Index>(s)) += cs.scatter(eps * step);
      ++r.iterations;
      still.push_back(s);
    }
    active = std::move(still);
  }

  for (std::size_t i = 0; i < count; ++i) {
    auto& r = results[i];
    r.v = v.col(static_cast<Eigen::Index>(i));
    r.a_hat = a.col(static_cast<Eigen::Index>(i)) + r.v;
    r.success = r.status == AttackStatus::fooled;
  }
  return results;
}

/// Single-sample attack. A z_a already classified Normal returns v = 0 and
/// success after zero iterations.
template <class View>
AdversarialResult craft_perturbation(const View& view, const ConstraintSystem& cs, const Vector& z_a, const Vector& a,
                                     const AttackConfig& cfg) {
  const ConstraintSystem* systems[] = {&cs};
  return craft_batch(view, std::span<const ConstraintSystem* const>(systems), Matrix(z_a), Matrix(a), cfg).front();
}

inline AdversarialResult craft_perturbation(const MlpModel& model, const ConstraintSystem& cs, const Vector& z_a,
                                            const Vector& a, const AttackConfig& cfg) {
  return craft_perturbation(PlainView(model), cs, z_a, a, cfg);
}

/// Attack against a padded detector at the offset the attacker assumes
/// (cfg.padding_offset). The returned v lives in measurement space.
inline AdversarialResult attack_padded(const PaddedModel& model, const ConstraintSystem& cs, const Vector& z_a,
                                       const Vector& a, const AttackConfig& cfg) {
  if (!cfg.padding_offset) throw UsageError("padded attack needs a padding offset");
  return craft_perturbation(PaddedView(model, *cfg.padding_offset), cs, z_a, a, cfg);
}

/// Baseline: scale the injected vector by alpha.
inline FalseDataVector vanilla_attack(const FalseDataVector& a, double alpha) { return {alpha * a.a, a.scenario}; }

}  // namespace fdia
