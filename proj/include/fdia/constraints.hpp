#pragma once

// Stealth constraint B a = 0 with B = H (H^T H)^{-1} H^T - I, restricted to
// the compromised measurement channels, and the dependent-variable
// factorization used to map arbitrary vectors onto its solution space.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "fdia/error.hpp"
#include "fdia/grid.hpp"
#include "fdia/random.hpp"

namespace fdia {

inline constexpr double kDefaultPivotTolerance = 1e-10;
inline constexpr double kStealthTolerance = 1e-8;

/// Projection matrix P and constraint matrix B = P - I of one H. Shared by
/// every ConstraintSystem built on the same network.
class StealthSpace {
 public:
  explicit StealthSpace(const MeasurementMatrix& h) : m_(h.m()), n_(h.n()) {
    Eigen::LLT<Matrix> hth(h.h.transpose() * h.h);
    if (hth.info() != Eigen::Success) throw NumericalError("H^T H is not positive definite");
    p_ = h.h * hth.solve(h.h.transpose());
    b_ = p_ - Matrix::Identity(m_, m_);
  }

  static std::shared_ptr<const StealthSpace> make(const MeasurementMatrix& h) {
    return std::make_shared<const StealthSpace>(h);
  }

  Eigen::Index m() const noexcept { return m_; }
  Eigen::Index n() const noexcept { return n_; }
  const Matrix& projection() const noexcept { return p_; }
  const Matrix& b() const noexcept { return b_; }

  /// ||B a||_inf <= tol * max(1, ||a||_inf)
  bool is_stealthy(const Vector& a, double tol = kStealthTolerance) const {
    const double scale = std::max(1.0, a.size() ? a.cwiseAbs().maxCoeff() : 0.0);
    return (b_ * a).cwiseAbs().maxCoeff() <= tol * scale;
  }

 private:
  Eigen::Index m_;
  Eigen::Index n_;
  Matrix p_;
  Matrix b_;
};

/// Compromised measurement indices C (sorted, unique) and their complement U.
class AttackScenario {
 public:
  AttackScenario() = default;

  AttackScenario(std::vector<int> compromised, Eigen::Index m) : compromised_(std::move(compromised)) {
    std::sort(compromised_.begin(), compromised_.end());
    if (std::adjacent_find(compromised_.begin(), compromised_.end()) != compromised_.end())
      throw DataError("compromised index set contains duplicates");
    if (!compromised_.empty() && (compromised_.front() < 0 || compromised_.back() >= m))
      throw DataError("compromised index out of range [0, " + std::to_string(m) + ")");
    std::vector<bool> hit(static_cast<std::size_t>(m), false);
    for (int i : compromised_) hit[static_cast<std::size_t>(i)] = true;
    for (int i = 0; i < static_cast<int>(m); ++i)
      if (!hit[static_cast<std::size_t>(i)]) uncompromised_.push_back(i);
  }

  /// k distinct indices drawn uniformly without replacement.
  static AttackScenario random(Eigen::Index m, int k, Rng& rng) {
    if (k < 0 || k > m) throw UsageError("cannot compromise " + std::to_string(k) + " of " + std::to_string(m) + " measurements");
    std::vector<int> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    // Partial Fisher-Yates; std::sample's draw order is implementation-defined.
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(m) - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    all.resize(static_cast<std::size_t>(k));
    return AttackScenario(std::move(all), m);
  }

  int k() const noexcept { return static_cast<int>(compromised_.size()); }
  Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(compromised_.size() + uncompromised_.size()); }
  const std::vector<int>& compromised() const noexcept { return compromised_; }
  const std::vector<int>& uncompromised() const noexcept { return uncompromised_; }

  bool operator==(const AttackScenario&) const = default;

 private:
  std::vector<int> compromised_;
  std::vector<int> uncompromised_;
};

/// Injected false data a together with the scenario that produced it.
struct FalseDataVector {
  Vector a;
  AttackScenario scenario;
};

class ConstraintSystem {
 public:
  ConstraintSystem(std::shared_ptr<const StealthSpace> space, AttackScenario scenario,
                   std::vector<int> independent, std::vector<int> dependent, Matrix dependency)
      : space_(std::move(space)),
        scenario_(std::move(scenario)),
        independent_(std::move(independent)),
        dependent_(std::move(dependent)),
        dependency_(std::move(dependency)) {}

  const StealthSpace& space() const noexcept { return *space_; }
  const std::shared_ptr<const StealthSpace>& space_ptr() const noexcept { return space_; }
  const Matrix& b() const noexcept { return space_->b(); }
  const AttackScenario& scenario() const noexcept { return scenario_; }

  /// Positions within C (0..k-1) of the free and pivot variables.
  const std::vector<int>& independent() const noexcept { return independent_; }
  const std::vector<int>& dependent() const noexcept { return dependent_; }
  /// |D| x |I| map from independent to dependent values.
  const Matrix& dependency() const noexcept { return dependency_; }

  Eigen::Index nullity() const noexcept { return static_cast<Eigen::Index>(independent_.size()); }

  /// B' = columns of B at the compromised indices (m x k).
  Matrix restricted() const {
    const auto& c = scenario_.compromised();
    Matrix out(space_->m(), static_cast<Eigen::Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = space_->b().col(c[j]);
    return out;
  }

  /// k-vector version of project(): keeps independent entries, rewrites
  /// dependent ones as dependency * g_I.
  Vector project_restricted(const Vector& g) const {
    if (g.size() != scenario_.k())
      throw DimensionError("restricted vector has " + std::to_string(g.size()) + " entries, k = " +
                           std::to_string(scenario_.k()));
    Vector gi(nullity());
    for (std::size_t i = 0; i < independent_.size(); ++i) gi[static_cast<Eigen::Index>(i)] = g[independent_[i]];
    Vector out = Vector::Zero(g.size());
    for (std::size_t i = 0; i < independent_.size(); ++i) out[independent_[i]] = gi[static_cast<Eigen::Index>(i)];
    if (!dependent_.empty()) {
      const Vector gd = dependency_ * gi;
      for (std::size_t i = 0; i < dependent_.size(); ++i) out[dependent_[i]] = gd[static_cast<Eigen::Index>(i)];
    }
    return out;
  }

  /// Maps an m-vector onto the stealth solution space of this scenario:
  /// zero on U, independent entries of g kept, dependent entries derived.
  Vector project(const Vector& g) const {
    if (g.size() != space_->m())
      throw DimensionError("vector has " + std::to_string(g.size()) + " entries, m = " + std::to_string(space_->m()));
    return scatter(project_restricted(gather(g)));
  }

  /// g_C
  Vector gather(const Vector& g) const {
    const auto& c = scenario_.compromised();
    Vector out(static_cast<Eigen::Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) out[static_cast<Eigen::Index>(j)] = g[c[j]];
    return out;
  }

  /// m-vector with g_C = restricted, zeros elsewhere.
  Vector scatter(const Vector& restricted) const {
    const auto& c = scenario_.compromised();
    Vector out = Vector::Zero(space_->m());
    for (std::size_t j = 0; j < c.size(); ++j) out[c[j]] = restricted[static_cast<Eigen::Index>(j)];
    return out;
  }

  /// Assembles the restricted vector whose independent coordinates are gi.
  Vector assemble(const Vector& gi) const {
    if (gi.size() != nullity()) throw DimensionError("independent coordinate count mismatch");
    Vector g = Vector::Zero(scenario_.k());
    for (std::size_t i = 0; i < independent_.size(); ++i) g[independent_[i]] = gi[static_cast<Eigen::Index>(i)];
    return project_restricted(g);
  }

 private:
  std::shared_ptr<const StealthSpace> space_;
  AttackScenario scenario_;
  std::vector<int> independent_;
  std::vector<int> dependent_;
  Matrix dependency_;
};

/// Gauss-Jordan reduction of B' with partial (row) pivoting. Columns are
/// visited in ascending order; a column whose best remaining pivot is at or
/// below pivot_tol * max|B'| is free (independent), otherwise it becomes a
/// pivot (dependent) column.
inline ConstraintSystem build_constraints(std::shared_ptr<const StealthSpace> space, AttackScenario scenario,
                                          double pivot_tol = kDefaultPivotTolerance) {
  const Eigen::Index m = space->m();
  const Eigen::Index n = space->n();
  const int k = scenario.k();
  if (scenario.m() != m)
    throw DimensionError("scenario is over " + std::to_string(scenario.m()) + " measurements, H has " + std::to_string(m));
  if (k <= m - n)
    throw UsageError("infeasible scenario: k = " + std::to_string(k) + " must exceed m - n = " + std::to_string(m - n));

  const auto& c = scenario.compromised();
  Matrix a(m, k);
  for (int j = 0; j < k; ++j) a.col(j) = space->b().col(c[static_cast<std::size_t>(j)]);
  const double tol = pivot_tol * a.cwiseAbs().maxCoeff();

  std::vector<int> pivots;
  std::vector<int> free;
  Eigen::Index r = 0;
  for (int j = 0; j < k; ++j) {
    if (r == m) {
      free.push_back(j);
      continue;
    }
    Eigen::Index p = 0;
    const double best = a.col(j).tail(m - r).cwiseAbs().maxCoeff(&p);
    p += r;
    if (best <= tol) {
      free.push_back(j);
      continue;
    }
    if (p != r) a.row(p).swap(a.row(r));
    a.row(r) /= a(r, j);
    Vector factor = a.col(j);
    factor[r] = 0.0;
    const Eigen::RowVectorXd pivot_row = a.row(r);
    a.noalias() -= factor * pivot_row;
    pivots.push_back(j);
    ++r;
  }

  const Eigen::Index nullity = static_cast<Eigen::Index>(free.size());
  if (nullity < k - (m - n) || nullity == 0)
    throw NumericalError("constraint reduction found nullspace dimension " + std::to_string(nullity) +
                         ", expected at least " + std::to_string(k - (m - n)) +
                         "; B' is numerically rank-deficient beyond the pivot tolerance");

  Matrix dependency(static_cast<Eigen::Index>(pivots.size()), nullity);
  for (std::size_t i = 0; i < pivots.size(); ++i)
    for (Eigen::Index f = 0; f < nullity; ++f)
      dependency(static_cast<Eigen::Index>(i), f) = -a(static_cast<Eigen::Index>(i), free[static_cast<std::size_t>(f)]);

  return ConstraintSystem(std::move(space), std::move(scenario), std::move(free), std::move(pivots), std::move(dependency));
}

inline ConstraintSystem build_constraints(const MeasurementMatrix& h, AttackScenario scenario,
                                          double pivot_tol = kDefaultPivotTolerance) {
  return build_constraints(StealthSpace::make(h), std::move(scenario), pivot_tol);
}

/// Random independent coordinates, assembled and rescaled to ||a||_1 = target_l1.
inline FalseDataVector generate_false_data(const ConstraintSystem& cs, double target_l1, Rng& rng) {
  if (!(target_l1 > 0.0)) throw UsageError("target L1 norm must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr int kMaxDraws = 16;
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    Vector gi(cs.nullity());
    for (Eigen::Index i = 0; i < gi.size(); ++i) gi[i] = gauss(rng);
    Vector a = cs.scatter(cs.assemble(gi));
    const double l1 = a.lpNorm<1>();
    if (!(l1 > 0.0) || !std::isfinite(l1)) continue;
    a *= target_l1 / l1;
    return {std::move(a), cs.scenario()};
  }
  throw NumericalError("false data generation produced only degenerate draws");
}

inline FalseDataVector generate_false_data(const ConstraintSystem& cs, double target_l1, std::uint64_t seed) {
  Rng rng(seed);
  return generate_false_data(cs, target_l1, rng);
}

/// Injection magnitude: N(0.05 mu, (0.01 mu)^2) truncated to positive values,
/// where mu is the mean L1 norm of legitimate measurement vectors.
inline double sample_target_l1(double mean_l1_of_legit, Rng& rng) {
  if (!(mean_l1_of_legit > 0.0)) throw UsageError("mean legitimate L1 norm must be positive");
  std::normal_distribution<double> d(0.05 * mean_l1_of_legit, 0.01 * mean_l1_of_legit);
  for (int i = 0; i < 64; ++i) {
    const double t = d(rng);
    if (t > 0.0) return t;
  }
  return 0.05 * mean_l1_of_legit;
}

inline double sample_target_l1(double mean_l1_of_legit, std::uint64_t seed) {
  Rng rng(seed);
  return sample_target_l1(mean_l1_of_legit, rng);
}

}  // namespace fdia
