#pragma once

#include <filesystem>
#include <string>

#include <Eigen/SVD>

#include "fdia/fdia.hpp"

namespace fdia::test {

inline std::filesystem::path data_dir() { return FDIA_TEST_DATA_DIR; }
inline std::filesystem::path case_path(const std::string& file) { return data_dir() / "cases" / file; }

/// Buses 1*, 2, 3; branches 1-2 x=0.5, 2-3 x=0.25, 1-3 x=0.2.
inline GridCase three_bus() {
  return GridCase("toy3", {{1, true, 0.0}, {2, false, 0.0}, {3, false, 0.0}},
                  {{1, 2, 0.5}, {2, 3, 0.25}, {1, 3, 0.2}});
}

/// Orthonormal basis of null(A) from a full SVD.
inline Matrix svd_nullspace(const Matrix& a, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = rel_tol * std::max(1.0, s.size() ? s[0] : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > cut ? 1 : 0;
  return svd.matrixV().rightCols(a.cols() - rank);
}

/// Largest principal angle between the column spans of two bases.
inline double subspace_angle(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  const double smallest = svd.singularValues().minCoeff();
  return std::acos(std::clamp(smallest, -1.0, 1.0));
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

/// Two Gaussian blobs in `dim` dimensions, labels 0 and 1, alternating.
inline std::pair<Matrix, std::vector<int>> blobs(std::size_t count, int dim, double separation, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix x(dim, static_cast<Eigen::Index>(count));
  std::vector<int> y(count);
  for (std::size_t i = 0; i < count; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (int r = 0; r < dim; ++r) x(r, static_cast<Eigen::Index>(i)) = d(rng) + (y[i] ? separation : -separation);
  }
  return {x, y};
}

/// Small dataset of the 14-bus case, quick enough for unit tests.
inline GenerationConfig small_generation() {
  GenerationConfig g;
  g.legit_count = 600;
  g.k_min = 8;
  g.k_max = 19;
  g.spread = 0.002;
  g.calibration_count = 500;
  g.test_ks = {10, 14};
  g.test_per_set = 60;
  return g;
}

/// 14-bus data and a trained plain detector, built once per test binary.
struct SmallWorld {
  GenerationContext context;
  Dataset train;
  std::vector<Dataset> tests;
  MlpModel model;

  static const SmallWorld& get() {
    static const SmallWorld world = [] {
      GenerationContext ctx(load_case(case_path("case14.json")), small_generation(), 17);
      Dataset train = build_train_set(ctx);
      auto tests = build_test_sets(ctx, train.mean_l1);
      TrainConfig cfg;
      cfg.learning_rate = 0.05;
      cfg.epochs = 60;
      cfg.rng_seed = 18;
      auto model = train_detector(train.z, train.labels, detector_layers(static_cast<int>(train.m())), cfg).model;
      return SmallWorld{std::move(ctx), std::move(train), std::move(tests), std::move(model)};
    }();
    return world;
  }
};

}  // namespace fdia::test
