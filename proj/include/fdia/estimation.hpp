#pragma once

// Weighted least-squares state estimation and the residual bad-data test.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "fdia/grid.hpp"

namespace fdia {

inline constexpr double kDefaultFalseAlarmRate = 0.01;

class Estimator {
 public:
  /// Identity weights.
  explicit Estimator(const MeasurementMatrix& h) : Estimator(h, Vector::Ones(h.m())) {}

  Estimator(const MeasurementMatrix& h, Vector weights) : h_(h.h), w_(std::move(weights)) {
    if (w_.size() != h_.rows())
      throw DimensionError("weight vector has " + std::to_string(w_.size()) + " entries, H has " +
                           std::to_string(h_.rows()) + " rows");
    if ((w_.array() <= 0.0).any()) throw UsageError("measurement weights must be positive");
    const Matrix gain = h_.transpose() * w_.asDiagonal() * h_;
    gain_.compute(gain);
    // LLT accepts some numerically singular matrices; double check the pivots.
    const auto diag = gain_.matrixLLT().diagonal();
    const double scale = gain.diagonal().cwiseAbs().maxCoeff();
    if (gain_.info() != Eigen::Success || h_.cols() == 0 ||
        diag.cwiseAbs().minCoeff() <= 1e-12 * std::sqrt(scale))
      throw NumericalError("gain matrix H^T W H is singular (is the case disconnected?)");
  }

  Eigen::Index m() const noexcept { return h_.rows(); }
  Eigen::Index n() const noexcept { return h_.cols(); }
  const Matrix& h() const noexcept { return h_; }
  const Vector& weights() const noexcept { return w_; }

  /// x_hat = (H^T W H)^{-1} H^T W z via the cached factorization.
  StateVector estimate(const MeasurementVector& z) const {
    check(z);
    return gain_.solve(h_.transpose() * (w_.asDiagonal() * z));
  }

  /// ||z - H x_hat||_2
  double residual_norm(const MeasurementVector& z) const { return (z - h_ * estimate(z)).norm(); }

  /// Sets tau to the empirical (1 - rate)-quantile of clean residuals
  /// (linear interpolation between order statistics) and returns it.
  double calibrate_tau(std::span<const MeasurementVector> clean, double false_alarm_rate = kDefaultFalseAlarmRate) {
    if (clean.empty()) throw UsageError("calibration needs at least one clean measurement vector");
    if (!(false_alarm_rate > 0.0 && false_alarm_rate < 1.0))
      throw UsageError("false alarm rate must lie in (0, 1)");
    std::vector<double> r;
    r.reserve(clean.size());
    for (const auto& z : clean) r.push_back(residual_norm(z));
    std::sort(r.begin(), r.end());
    const double pos = (1.0 - false_alarm_rate) * static_cast<double>(r.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, r.size() - 1);
    tau_ = r[lo] + (pos - static_cast<double>(lo)) * (r[hi] - r[lo]);
    return *tau_;
  }

  void set_tau(double tau) {
    if (!(tau >= 0.0)) throw UsageError("tau must be nonnegative");
    tau_ = tau;
  }
  std::optional<double> tau() const noexcept { return tau_; }

  /// True when z is flagged as bad data.
  bool detect(const MeasurementVector& z) const {
    if (!tau_) throw UsageError("residual threshold not calibrated");
    return residual_norm(z) > *tau_;
  }

 private:
  void check(const MeasurementVector& z) const {
    if (z.size() != h_.rows())
      throw DimensionError("measurement vector has " + std::to_string(z.size()) + " entries, expected " +
                           std::to_string(h_.rows()));
  }

  Matrix h_;
  Vector w_;
  Eigen::LLT<Matrix> gain_;
  std::optional<double> tau_;
};

}  // namespace fdia
