#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "netwit/generators.hpp"
#include "netwit/metric_space.hpp"

using namespace netwit;

TEST(FiniteMetricSpace, TwoPointSpaceHasUnitDiameter) {
  auto s = FiniteMetricSpace::from_rows({{0, 1}, {1, 0}});
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.diameter(), 1.0);
  EXPECT_EQ(s(0, 1), 1.0);
}

TEST(FiniteMetricSpace, AsymmetricMatrixIsRejected) {
  EXPECT_THROW(FiniteMetricSpace::from_rows({{0, 1}, {2, 0}}), AsymmetryError);
}

TEST(FiniteMetricSpace, NegativeEntryIsRejected) {
  EXPECT_THROW(FiniteMetricSpace::from_rows({{0, -1}, {-1, 0}}), NegativeDistance);
}

TEST(FiniteMetricSpace, NonzeroDiagonalAndRaggedRowsAreRejected) {
  EXPECT_THROW(FiniteMetricSpace::from_rows({{1, 1}, {1, 0}}), InvalidMatrix);
  EXPECT_THROW(FiniteMetricSpace::from_rows({{0, 1}, {1}}), InvalidMatrix);
  EXPECT_THROW(FiniteMetricSpace::from_rows({{0, NAN}, {NAN, 0}}), InvalidMatrix);
}

TEST(FiniteMetricSpace, TriangleViolationReportsWitness) {
  const std::vector<std::vector<double>> d{{0, 1, 5}, {1, 0, 1}, {5, 1, 0}};
  try {
    FiniteMetricSpace::from_rows(d);
    FAIL() << "expected a triangle violation";
  } catch (const TriangleViolation& e) {
    EXPECT_GT(d[e.a()][e.c()], d[e.a()][e.b()] + d[e.b()][e.c()]);
  }
}

TEST(FiniteMetricSpace, LineGridDiameter) {
  auto s = FiniteMetricSpace::from_points({{0.0}, {0.5}, {1.0}}, PointMetric::euclidean);
  EXPECT_DOUBLE_EQ(s.diameter(), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(FiniteMetricSpace, PseudometricZeroDistancesAllowed) {
  auto s = FiniteMetricSpace::from_rows({{0, 0, 1}, {0, 0, 1}, {1, 1, 0}});
  EXPECT_EQ(s(0, 1), 0.0);
}

TEST(FiniteMetricSpace, SinglePointSpace) {
  auto s = FiniteMetricSpace::from_rows({{0}});
  EXPECT_EQ(s.diameter(), 0.0);
  auto p = Distribution::uniform(s);
  EXPECT_EQ(p[0], 1.0);
}

TEST(FiniteMetricSpace, PointMetricsAgreeWithDirectFormulas) {
  auto e = FiniteMetricSpace::from_points({{0, 0}, {3, 4}}, PointMetric::euclidean);
  auto m = FiniteMetricSpace::from_points({{0, 0}, {3, 4}}, PointMetric::linf);
  EXPECT_DOUBLE_EQ(e(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(m.diameter(), 4.0);
  EXPECT_DOUBLE_EQ(e.diameter(), 5.0);
}

TEST(FiniteMetricSpace, LinfBoundingBoxDiameterMatchesPairScan) {
  auto s = random_point_space(40, 3, PointMetric::linf, 7);
  double brute = 0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b) brute = std::max(brute, s(a, b));
  EXPECT_DOUBLE_EQ(s.diameter(), brute);
}

TEST(FiniteMetricSpace, CopiesShareIdentity) {
  auto a = line_space(3);
  auto b = a;
  auto c = line_space(3);
  EXPECT_TRUE(a.same_as(b));
  EXPECT_FALSE(a.same_as(c));
}

TEST(Distribution, ValidatesMass) {
  auto s = line_space(2);
  EXPECT_THROW(Distribution(s, {0.5, 0.6}), InvalidDistribution);
  EXPECT_THROW(Distribution(s, {1.5, -0.5}), InvalidDistribution);
  EXPECT_THROW(Distribution(s, {1.0}), SizeMismatch);
  EXPECT_NO_THROW(Distribution(s, {0.5, 0.5 + 1e-10}));
}

TEST(L1Distance, Examples) {
  auto s = line_space(2);
  Distribution p(s, {1, 0}), q(s, {0, 1}), a(s, {0.5, 0.5}), b(s, {0.25, 0.75});
  EXPECT_EQ(l1_distance(p, p), 0.0);
  EXPECT_EQ(l1_distance(p, q), 2.0);
  EXPECT_DOUBLE_EQ(l1_distance(a, b), 0.5);
}

TEST(L1Distance, SpaceMismatch) {
  auto s = line_space(2), t = line_space(2);
  EXPECT_THROW(l1_distance(Distribution::uniform(s), Distribution::uniform(t)), SpaceMismatch);
}

TEST(BallMass, ClosedBalls) {
  auto s = line_space(5);
  auto p = Distribution::uniform(s);
  EXPECT_DOUBLE_EQ(ball_mass(p, 2, 1.0), 0.6);
  EXPECT_DOUBLE_EQ(ball_mass(p, 0, 0.999), 0.2);
  EXPECT_EQ(ball(s, 0, 2.0).size(), 3u);
}
