#include <gtest/gtest.h>

#include "support.hpp"

using namespace fdia;

namespace {

const test::SmallWorld& world() { return test::SmallWorld::get(); }

/// Test-set rows the detector currently flags, with their constraint system.
struct Targets {
  std::vector<ConstraintSystem> systems;
  std::vector<Eigen::Index> rows;
  const Dataset* set;
};

Targets detected(std::size_t which) {
  const auto& w = world();
  Targets t{build_systems(w.context.space(), w.tests[which]), {}, &w.tests[which]};
  const auto predicted = predict_batch(w.model, t.set->z);
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == kFalse) t.rows.push_back(static_cast<Eigen::Index>(i));
  return t;
}

TEST(Craft, AlreadyNormalReturnsImmediately) {
  const auto& w = world();
  const auto normal = w.train.with_label(kNormal);
  const auto predicted = predict_batch(w.model, normal.z);
  const auto it = std::find(predicted.begin(), predicted.end(), kNormal);
  ASSERT_NE(it, predicted.end());
  const auto col = static_cast<Eigen::Index>(it - predicted.begin());
  Rng rng(1);
  const auto cs = build_constraints(w.context.space(), AttackScenario::random(w.train.m(), 12, rng));
  const auto r = craft_perturbation(w.model, cs, normal.z.col(col), Vector::Zero(w.train.m()), AttackConfig{});
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.v, Vector::Zero(w.train.m()));
}

TEST(Craft, OutputsAreStealthyAndSupported) {
  const auto& w = world();
  for (std::size_t s = 0; s < w.tests.size(); ++s) {
    const auto t = detected(s);
    const auto& cs = t.systems.front();
    for (auto col : t.rows) {
      const auto r = craft_perturbation(w.model, cs, t.set->z.col(col), t.set->a.col(col), AttackConfig{});
      for (int u : cs.scenario().uncompromised()) ASSERT_EQ(r.v[u], 0.0);
      ASSERT_TRUE(w.context.space()->is_stealthy(r.a_hat));
      const Vector clean = t.set->z.col(col) - t.set->a.col(col);
      const auto& est = w.context.estimator();
      ASSERT_LE(est.residual_norm(clean + r.a_hat) - est.residual_norm(clean), 1e-8);
      EXPECT_EQ(r.success, predict(w.model, t.set->z.col(col) + r.v) == kNormal);
    }
  }
}

TEST(Craft, EveryStepHasTheConfiguredSize) {
  const auto& w = world();
  const auto t = detected(1);
  ASSERT_FALSE(t.rows.empty());
  const auto col = t.rows.front();
  AttackConfig cfg;
  cfg.size = 0.05;
  Vector previous = Vector::Zero(w.train.m());
  for (int n = 1; n <= 5; ++n) {
    cfg.max_iters = n;
    const auto r = craft_perturbation(w.model, t.systems.front(), t.set->z.col(col), t.set->a.col(col), cfg);
    if (r.iterations < n) break;  // fooled earlier
    EXPECT_NEAR((r.v - previous).cwiseAbs().maxCoeff(), cfg.size, 1e-12);
    previous = r.v;
  }
}

TEST(Craft, BatchMatchesSingle) {
  const auto& w = world();
  const auto t = detected(0);
  ASSERT_GE(t.rows.size(), 3u);
  Matrix z(w.train.m(), 3), a(w.train.m(), 3);
  std::vector<const ConstraintSystem*> systems(3, &t.systems.front());
  for (Eigen::Index i = 0; i < 3; ++i) {
    z.col(i) = t.set->z.col(t.rows[static_cast<std::size_t>(i)]);
    a.col(i) = t.set->a.col(t.rows[static_cast<std::size_t>(i)]);
  }
  const auto batch = craft_batch(PlainView(w.model), std::span<const ConstraintSystem* const>(systems), z, a, AttackConfig{});
  for (Eigen::Index i = 0; i < 3; ++i) {
    const auto single = craft_perturbation(w.model, t.systems.front(), z.col(i), a.col(i), AttackConfig{});
    EXPECT_LE((single.v - batch[static_cast<std::size_t>(i)].v).cwiseAbs().maxCoeff(), 1e-12);  // GEMM vs GEMV rounding
    EXPECT_EQ(single.iterations, batch[static_cast<std::size_t>(i)].iterations);
  }
}

TEST(Craft, LowersRecallOnTheSmallCase) {
  const auto& w = world();
  ExperimentConfig cfg;
  const auto report = run_attack_experiment(w.model, w.context.space(), w.tests, cfg);
  for (std::size_t s = 0; s < w.tests.size(); ++s) {
    const auto clean = evaluate(w.model, w.tests[s].z, w.tests[s].labels).recall;
    EXPECT_LT(report.rows[s].recall, clean);
  }
}

TEST(Craft, ConfigValidation) {
  const auto& w = world();
  const auto t = detected(0);
  AttackConfig cfg;
  cfg.size = 0.0;
  EXPECT_THROW(craft_perturbation(w.model, t.systems.front(), t.set->z.col(0), t.set->a.col(0), cfg), UsageError);
  cfg = AttackConfig{};
  cfg.max_iters = 0;
  EXPECT_THROW(craft_perturbation(w.model, t.systems.front(), t.set->z.col(0), t.set->a.col(0), cfg), UsageError);
  EXPECT_THROW(craft_perturbation(w.model, t.systems.front(), Vector::Zero(3), Vector::Zero(3), AttackConfig{}), DimensionError);
}

TEST(Craft, ZeroGradientStopsWithDiagnostic) {
  const auto& w = world();
  auto flat = w.model;
  for (auto& l : flat.layers) l.weights.setZero();
  flat.layers.back().bias[kFalse] = 1.0;  // always False, no input dependence
  const auto t = detected(0);
  const auto r = craft_perturbation(flat, t.systems.front(), t.set->z.col(0), t.set->a.col(0), AttackConfig{});
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.status, AttackStatus::no_descent);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Vanilla, ScalingProperties) {
  const auto& w = world();
  const auto& set = w.tests.front();
  const FalseDataVector fdv{set.a.col(0), set.scenarios.front()};
  EXPECT_EQ(vanilla_attack(fdv, 1.0).a, fdv.a);
  EXPECT_EQ(vanilla_attack(fdv, 0.0).a, Vector::Zero(fdv.a.size()));
  const auto& b = w.context.space()->b();
  for (double alpha : {-3.0, 0.5, 7.0}) {
    const auto scaled = vanilla_attack(fdv, alpha);
    EXPECT_EQ(scaled.scenario, fdv.scenario);
    EXPECT_LE((b * scaled.a).cwiseAbs().maxCoeff(), std::abs(alpha) * 1e-8 * std::max(1.0, fdv.a.cwiseAbs().maxCoeff()));
  }
  const Vector clean = set.z.col(0) - set.a.col(0);
  const auto& est = w.context.estimator();
  EXPECT_NEAR(est.residual_norm(clean + vanilla_attack(fdv, 0.0).a), est.residual_norm(clean), 1e-15);
}

TEST(Vanilla, RecallTrendsUpWithAlpha) {
  const auto& w = world();
  const std::vector<double> alphas{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  const auto report = run_vanilla_sweep(w.model, w.tests, alphas);
  for (std::size_t s = 0; s < w.tests.size(); ++s) {
    std::vector<double> recall;
    for (std::size_t i = 0; i < alphas.size(); ++i) recall.push_back(report.rows[s * alphas.size() + i].recall);
    EXPECT_GE(spearman(alphas, recall), 0.8) << "test set " << s;
  }
}

TEST(Vanilla, ZeroAlphaGivesFalsePositiveRate) {
  const auto& w = world();
  const std::vector<double> alphas{0.0};
  const auto report = run_vanilla_sweep(w.model, w.tests, alphas);
  for (std::size_t s = 0; s < w.tests.size(); ++s) {
    const Matrix clean = w.tests[s].z - w.tests[s].a;
    const auto predicted = predict_batch(w.model, clean);
    const double fp = static_cast<double>(std::count(predicted.begin(), predicted.end(), kFalse)) / static_cast<double>(predicted.size());
    EXPECT_DOUBLE_EQ(report.rows[s].recall, fp);
  }
}

}  // namespace
