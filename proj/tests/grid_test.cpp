#include <gtest/gtest.h>

#include "support.hpp"

using namespace fdia;
using fdia::test::three_bus;

namespace {

const char* kThreeBusJson = R"({"name": "toy3",
  "buses": [{"id": 1, "ref": true}, {"id": 2}, {"id": 3}],
  "branches": [{"from": 1, "to": 2, "x": 0.5}, {"from": 2, "to": 3, "x": 0.25}, {"from": 1, "to": 3, "x": 0.2}]})";

TEST(ParseCase, ThreeBusNative) {
  const auto gc = parse_case(kThreeBusJson, CaseFormat::native_json);
  EXPECT_EQ(gc.measurement_count(), 3u);
  EXPECT_EQ(gc.reference_bus().id, 1);
  EXPECT_EQ(gc.state_count(), 2u);
  EXPECT_EQ(gc, three_bus());
}

TEST(ParseCase, DroppingOneBranchKeepsTheGraphConnected) {
  const auto gc = parse_case(R"({"buses": [{"id": 1, "ref": true}, {"id": 2}, {"id": 3}],
    "branches": [{"from": 1, "to": 2, "x": 0.5}, {"from": 1, "to": 3, "x": 0.2}]})",
                             CaseFormat::native_json);
  EXPECT_EQ(gc.measurement_count(), 2u);
}

TEST(ParseCase, Matpower14Bus) {
  const auto gc = load_case(test::case_path("case14.m"));
  EXPECT_EQ(gc.buses().size(), 14u);
  EXPECT_EQ(gc.branches().size(), 20u);
  EXPECT_EQ(gc.reference_bus().id, 1);
}

TEST(ParseCase, MatpowerAndNativeFixturesAgree) {
  const auto m = load_case(test::case_path("case118.m"));
  const auto j = load_case(test::case_path("case118.json"));
  EXPECT_EQ(m.branches(), j.branches());
  EXPECT_EQ(m.reference_bus().id, j.reference_bus().id);
}

TEST(ParseCase, RejectsInvalidCases) {
  EXPECT_THROW(parse_case(R"({"buses": [{"id": 1}, {"id": 2}], "branches": [{"from": 1, "to": 2, "x": 1}]})",
                          CaseFormat::native_json),
               DataError);  // no reference bus
  EXPECT_THROW(parse_case(R"({"buses": [{"id": 1, "ref": true}, {"id": 1}], "branches": []})", CaseFormat::native_json),
               DataError);  // duplicate id
  EXPECT_THROW(parse_case(R"({"buses": [{"id": 1, "ref": true}, {"id": 2}], "branches": [{"from": 1, "to": 2, "x": 0}]})",
                          CaseFormat::native_json),
               DataError);  // nonpositive reactance
  EXPECT_THROW(parse_case(R"({"buses": [{"id": 1, "ref": true}, {"id": 2}, {"id": 3}], "branches": [{"from": 1, "to": 2, "x": 1}]})",
                          CaseFormat::native_json),
               DataError);  // disconnected
}

TEST(ParseCase, SyntaxErrorsCarryPosition) {
  try {
    parse_case("{\"buses\": [\n  {\"id\": 1,, }]}", CaseFormat::native_json);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(ParseCase, MatpowerToleratesCommentsAndTrailingColumns) {
  const char* text = R"(% toy
mpc.bus = [
  1 3 0 0 0 0 1 1 0 % slack
  2 1 0 0 0 0 1 1 0;
];
mpc.branch = [
  1 2 0.01 0.5 0 0 0 0 0 0 1;  % only columns 1, 2 and 4 matter
];)";
  const auto gc = parse_case(text, CaseFormat::matpower_subset);
  ASSERT_EQ(gc.branches().size(), 1u);
  EXPECT_DOUBLE_EQ(gc.branches()[0].reactance, 0.5);
  EXPECT_EQ(gc.reference_bus().id, 1);
}

TEST(ParseCase, RoundTrip) {
  for (const char* file : {"case3.json", "case14.m", "case118.json"}) {
    const auto gc = load_case(test::case_path(file));
    EXPECT_EQ(parse_case(serialize_case(gc), CaseFormat::native_json), gc) << file;
  }
}

TEST(BuildH, ThreeBusByHand) {
  const auto h = build_h(three_bus());
  Matrix expected(3, 2);
  expected << -2, 0, 4, -4, 0, -5;
  EXPECT_EQ(h.h, expected);
  EXPECT_EQ(h.state_bus_ids, (std::vector<int>{2, 3}));
}

TEST(BuildH, TwoBus) {
  const GridCase gc("two", {{1, true, 0.0}, {2, false, 0.0}}, {{1, 2, 1.0}});
  EXPECT_EQ(build_h(gc).h, Matrix::Constant(1, 1, -1.0));
}

TEST(BuildH, Ieee118ShapeAndRank) {
  const auto h = build_h(load_case(test::case_path("case118.json")));
  EXPECT_EQ(h.m(), 186);
  EXPECT_EQ(h.n(), 117);
  EXPECT_EQ(h.m() - h.n(), 69);
  Eigen::JacobiSVD<Matrix> svd(h.h);
  const auto& s = svd.singularValues();
  EXPECT_GT(s[s.size() - 1], 1e-8 * s[0]);
}

TEST(BuildH, RowStructure) {
  const auto gc = load_case(test::case_path("case118.json"));
  const auto h = build_h(gc);
  const int ref = gc.reference_bus().id;
  for (Eigen::Index r = 0; r < h.m(); ++r) {
    const auto& br = gc.branches()[static_cast<std::size_t>(r)];
    const bool touches_ref = br.from_bus == ref || br.to_bus == ref;
    EXPECT_EQ((h.h.row(r).array() != 0.0).count(), touches_ref ? 1 : 2);
    for (Eigen::Index c = 0; c < h.n(); ++c)
      if (h.h(r, c) != 0.0) { EXPECT_DOUBLE_EQ(std::abs(h.h(r, c)), 1.0 / br.reactance); }
    if (!touches_ref) { EXPECT_EQ(h.h.row(r).sum(), 0.0); }
  }
}

TEST(SampleStates, ZeroSpreadGivesBaseAngles) {
  const auto gc = load_case(test::case_path("case14.json"));
  for (const auto& x : sample_states(gc, 4, 0.0, std::uint64_t{99})) EXPECT_EQ(x, gc.base_state());
}

TEST(SampleStates, Deterministic) {
  const auto gc = three_bus();
  EXPECT_EQ(sample_states(gc, 5, 0.1, std::uint64_t{3}), sample_states(gc, 5, 0.1, std::uint64_t{3}));
  EXPECT_TRUE(sample_states(gc, 0, 0.1, std::uint64_t{3}).empty());
}

TEST(SampleStates, MeanConvergesToBase) {
  const auto gc = load_case(test::case_path("case14.json"));
  const auto xs = sample_states(gc, 10000, 0.1, std::uint64_t{5});
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(gc.state_count()));
  for (const auto& x : xs) mean += x;
  mean /= 10000.0;
  EXPECT_LT((mean - gc.base_state()).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Measure, NoiselessIsHx) {
  const auto h = build_h(three_bus());
  Vector x(2);
  x << 0.1, 0.2;
  Vector expected(3);
  expected << -0.2, -0.4, -1.0;
  EXPECT_LT((measure(h, x, 0.0, std::uint64_t{1}) - expected).norm(), 1e-15);
  EXPECT_THROW(measure(h, Vector::Zero(3), 0.0, std::uint64_t{1}), DimensionError);
}

TEST(Measure, NoiseStandardDeviation) {
  const auto h = build_h(three_bus());
  const Vector x = Vector::Zero(2);
  Rng rng(11);
  Vector sum = Vector::Zero(3), sq = Vector::Zero(3);
  for (int i = 0; i < 10000; ++i) {
    const auto z = measure(h, x, 0.01, rng);
    sum += z;
    sq += z.cwiseProduct(z);
  }
  const Vector var = sq / 10000.0 - (sum / 10000.0).cwiseProduct(sum / 10000.0);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(std::sqrt(var[i]), 0.01, 0.001);
}

}  // namespace
