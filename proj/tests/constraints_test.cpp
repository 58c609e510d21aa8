#include <gtest/gtest.h>

#include "support.hpp"

using namespace fdia;

namespace {

/// Restricted vector in null(B') whose independent coordinates equal those
/// of g, reconstructed from an SVD basis.
Vector oracle_projection(const ConstraintSystem& cs, const Vector& g_restricted) {
  const Matrix basis = test::svd_nullspace(cs.restricted());
  Matrix rows(cs.nullity(), basis.cols());
  Vector gi(cs.nullity());
  for (std::size_t i = 0; i < cs.independent().size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = basis.row(cs.independent()[i]);
    gi[static_cast<Eigen::Index>(i)] = g_restricted[cs.independent()[i]];
  }
  return basis * rows.fullPivLu().solve(gi);
}

class Fixtures : public ::testing::TestWithParam<const char*> {};

TEST_P(Fixtures, ProjectionMatrixIsIdempotentAndSymmetric) {
  const auto h = build_h(load_case(test::case_path(GetParam())));
  const StealthSpace space(h);
  const Matrix& p = space.projection();
  EXPECT_LE((p * p - p).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_P(Fixtures, ColumnSpaceIsFixedAndAnnihilated) {
  const auto h = build_h(load_case(test::case_path(GetParam())));
  const StealthSpace space(h);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vector a = h.h * test::random_vector(h.n(), rng);
    EXPECT_LE((space.projection() * a - a).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((space.b() * a).cwiseAbs().maxCoeff(), 1e-8);
  }
}

INSTANTIATE_TEST_SUITE_P(Cases, Fixtures, ::testing::Values("case3.json", "case14.json", "case118.json"));

TEST(BuildConstraints, AllCompromisedGivesStateDimension) {
  const auto h = build_h(load_case(test::case_path("case14.json")));
  std::vector<int> all(static_cast<std::size_t>(h.m()));
  std::iota(all.begin(), all.end(), 0);
  const auto cs = build_constraints(h, AttackScenario(all, h.m()));
  EXPECT_EQ(cs.nullity(), h.n());
  Rng rng(2);
  const Vector a = h.h * test::random_vector(h.n(), rng);
  EXPECT_LE((cs.project(a) - a).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BuildConstraints, ThreeBusAgainstSvd) {
  const auto h = build_h(test::three_bus());
  const auto cs = build_constraints(h, AttackScenario({0, 1}, 3));
  ASSERT_GE(cs.nullity(), 1);
  const Matrix oracle = test::svd_nullspace(cs.restricted());
  ASSERT_EQ(oracle.cols(), cs.nullity());
  Matrix ours(2, cs.nullity());
  for (Eigen::Index i = 0; i < cs.nullity(); ++i) ours.col(i) = cs.assemble(Vector::Unit(cs.nullity(), i));
  EXPECT_LE(test::subspace_angle(ours, oracle), 1e-6);
}

TEST(BuildConstraints, InfeasibleScenario) {
  const auto h = build_h(test::three_bus());
  EXPECT_THROW(build_constraints(h, AttackScenario({0}, 3)), UsageError);  // k = m - n
}

TEST(BuildConstraints, PartitionAndBound) {
  const auto h = build_h(load_case(test::case_path("case118.json")));
  const auto space = StealthSpace::make(h);
  Rng rng(3);
  for (int k : {70, 85, 99, 150}) {
    const auto cs = build_constraints(space, AttackScenario::random(h.m(), k, rng));
    std::vector<int> all = cs.independent();
    all.insert(all.end(), cs.dependent().begin(), cs.dependent().end());
    std::sort(all.begin(), all.end());
    std::vector<int> expected(static_cast<std::size_t>(k));
    std::iota(expected.begin(), expected.end(), 0);
    EXPECT_EQ(all, expected);
    EXPECT_GE(cs.nullity(), k - (h.m() - h.n()));
  }
}

TEST(BuildConstraints, NullityMatchesSvdRankOnSmallCases) {
  for (const char* file : {"case3.json", "case14.json"}) {
    const auto h = build_h(load_case(test::case_path(file)));
    const auto space = StealthSpace::make(h);
    Rng rng(4);
    for (int s = 0; s < 50; ++s) {
      std::uniform_int_distribution<int> kd(static_cast<int>(h.m() - h.n()) + 1, static_cast<int>(h.m()));
      const auto cs = build_constraints(space, AttackScenario::random(h.m(), kd(rng), rng));
      const Matrix oracle = test::svd_nullspace(cs.restricted());
      ASSERT_EQ(cs.nullity(), oracle.cols()) << file << " scenario " << s;
      Matrix ours(cs.scenario().k(), cs.nullity());
      for (Eigen::Index i = 0; i < cs.nullity(); ++i) ours.col(i) = cs.assemble(Vector::Unit(cs.nullity(), i));
      EXPECT_LE(test::subspace_angle(ours, oracle), 1e-6) << file << " scenario " << s;
    }
  }
}

TEST(Project, MatchesOracleOnThreeBus) {
  const auto h = build_h(test::three_bus());
  const auto cs = build_constraints(h, AttackScenario({0, 1}, 3));
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vector g = test::random_vector(3, rng);
    const Vector p = cs.project(g);
    EXPECT_EQ(p[2], 0.0);
    EXPECT_LE((cs.gather(p) - oracle_projection(cs, cs.gather(g))).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Project, Properties118) {
  const auto h = build_h(load_case(test::case_path("case118.json")));
  const auto space = StealthSpace::make(h);
  Rng rng(6);
  for (int s = 0; s < 20; ++s) {
    const auto cs = build_constraints(space, AttackScenario::random(h.m(), 75 + s, rng));
    const Vector g = test::random_vector(h.m(), rng);
    const Vector p = cs.project(g);
    for (int u : cs.scenario().uncompromised()) ASSERT_EQ(p[u], 0.0);
    for (int i : cs.independent()) ASSERT_EQ(p[cs.scenario().compromised()[static_cast<std::size_t>(i)]], g[cs.scenario().compromised()[static_cast<std::size_t>(i)]]);
    EXPECT_TRUE(space->is_stealthy(p));
    EXPECT_LE((cs.project(p) - p).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(cs.project(Vector::Zero(h.m())), Vector::Zero(h.m()));
  }
}

TEST(GenerateFalseData, InvariantsAndScale) {
  const auto h = build_h(load_case(test::case_path("case118.json")));
  const auto space = StealthSpace::make(h);
  const Estimator est(h);
  Rng rng(7);
  const auto cs = build_constraints(space, AttackScenario::random(h.m(), 80, rng));
  for (int i = 0; i < 100; ++i) {
    const auto fdv = generate_false_data(cs, 2.0, rng);
    EXPECT_NEAR(fdv.a.lpNorm<1>(), 2.0, 1e-9);
    for (int u : cs.scenario().uncompromised()) ASSERT_EQ(fdv.a[u], 0.0);
    EXPECT_TRUE(space->is_stealthy(fdv.a));
    const Vector z = h.h * test::random_vector(h.n(), rng, 0.05) + test::random_vector(h.m(), rng, 0.001);
    EXPECT_LE(est.residual_norm(z + fdv.a) - est.residual_norm(z), 1e-8);
  }
  EXPECT_THROW(generate_false_data(cs, 0.0, rng), UsageError);
}

TEST(GenerateFalseData, FixedPointOfProjection) {
  const auto h = build_h(load_case(test::case_path("case14.json")));
  const auto cs = build_constraints(h, AttackScenario({0, 2, 3, 5, 7, 8, 9, 11, 13, 15, 17, 19}, h.m()));
  const auto fdv = generate_false_data(cs, 1.0, std::uint64_t{8});
  EXPECT_LE((cs.project(fdv.a) - fdv.a).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(fdv.a, generate_false_data(cs, 1.0, std::uint64_t{8}).a);
}

TEST(SampleTargetL1, Statistics) {
  Rng rng(9);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double t = sample_target_l1(100.0, rng);
    ASSERT_GT(t, 0.0);
    sum += t;
  }
  EXPECT_NEAR(sum / 10000.0, 5.0, 0.1);
  EXPECT_THROW(sample_target_l1(0.0, rng), UsageError);
}

TEST(AttackScenario, Validation) {
  EXPECT_THROW(AttackScenario({1, 1}, 3), DataError);
  EXPECT_THROW(AttackScenario({3}, 3), DataError);
  const AttackScenario s({2, 0}, 4);
  EXPECT_EQ(s.compromised(), (std::vector<int>{0, 2}));
  EXPECT_EQ(s.uncompromised(), (std::vector<int>{1, 3}));
  Rng a(10), b(10);
  EXPECT_EQ(AttackScenario::random(186, 80, a), AttackScenario::random(186, 80, b));
}

}  // namespace
