#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"

using namespace qpbif;
using fixtures::carrying;
using fixtures::migration;

TEST(TrigPoly, EvalExamples) {
  EXPECT_DOUBLE_EQ(migration()(0.0), 2.4);
  EXPECT_NEAR(migration()(std::numbers::pi), 1.8, 1e-15);
  const TrigPoly k(2.6);
  for (double t : {-1e4, -3.0, 0.0, 17.5, 1e4}) EXPECT_EQ(k(t), 2.6);
}

TEST(TrigPoly, MeanIsConstantTerm) {
  EXPECT_EQ(migration().mean(), 2.1);
  EXPECT_EQ(carrying().mean(), 2.0);
  EXPECT_EQ(TrigPoly(1.0).mean(), 1.0);
}

TEST(TrigPoly, BoundsExamples) {
  EXPECT_DOUBLE_EQ(carrying().lower_bound(), 1.5);
  EXPECT_DOUBLE_EQ(carrying().upper_bound(), 2.5);
  EXPECT_NEAR(migration().lower_bound(), 1.8, 1e-15);
  EXPECT_NEAR(migration().upper_bound(), 2.4, 1e-15);
}

TEST(TrigPoly, ConservativeBoundAgainstGridOracle) {
  const TrigPoly p(1.0, {Harmonic{1.0, 1.0, 0.0, TrigKind::Cosine}, Harmonic{1.0, 1.0, 0.0, TrigKind::Sine}});
  EXPECT_EQ(p.lower_bound(), -1.0);
  EXPECT_EQ(p.upper_bound(), 3.0);
  // Dense sampling over many periods recovers the tight range 1 -/+ sqrt2.
  double lo = p(0.0);
  double hi = lo;
  for (int i = 0; i <= 2'000'000; ++i) {
    const double v = p(i * 1e-4);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_NEAR(lo, 1.0 - std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(hi, 1.0 + std::sqrt(2.0), 1e-7);
  const Interval g = p.grid_bounds(20.0);
  EXPECT_NEAR(g.lo, 1.0 - std::sqrt(2.0), 1e-6);
  EXPECT_GE(g.lo, p.lower_bound());
}

TEST(TrigPoly, RejectsBadHarmonics) {
  EXPECT_THROW(TrigPoly(0.0, {Harmonic{1.0, 0.0, 0.0, TrigKind::Sine}}), std::invalid_argument);
  EXPECT_THROW(TrigPoly(0.0, {Harmonic{1.0, -2.0, 0.0, TrigKind::Sine}}), std::invalid_argument);
  EXPECT_THROW(TrigPoly(0.0, {Harmonic{NAN, 1.0, 0.0, TrigKind::Sine}}), std::invalid_argument);
}

TEST(TrigPolyProperty, RandomTimesStayInsideBounds) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> t(-1e4, 1e4);
  const TrigPoly p(0.3, {Harmonic{0.7, std::sqrt(2.0), 0.4, TrigKind::Sine},
                         Harmonic{-0.2, std::numbers::pi, 1.1, TrigKind::Cosine},
                         Harmonic{0.05, 0.1, 0.0, TrigKind::Sine}});
  for (const TrigPoly* q : {&p}) {
    const double lo = q->lower_bound();
    const double hi = q->upper_bound();
    for (int i = 0; i < 1'000'000; ++i) {
      const double v = (*q)(t(rng));
      ASSERT_LE(lo, v);
      ASSERT_LE(v, hi);
    }
  }
}

TEST(TrigPolyProperty, TimeAverageApproachesMean) {
  // Deviation of (1/T) int_0^T from the constant is at most
  // sum |2 amplitude / (frequency T)|.
  const TrigPoly p = carrying();
  const double T = 1e4;
  const int n = 10'000'000;
  const double dt = T / n;
  double acc = 0.5 * (p(0.0) + p(T));
  for (int i = 1; i < n; ++i) acc += p(i * dt);
  const double avg = acc * dt / T;
  const double bound = 2.0 * 0.5 / (std::sqrt(3.0) * T);
  EXPECT_LE(std::abs(avg - p.mean()), bound);
}

TEST(Coefficient, ProductQuotientEvalAndBounds) {
  const Coefficient scale(1.0, {TrigPoly(1.0)}, {carrying()});
  EXPECT_DOUBLE_EQ(scale(0.0), 0.5);
  EXPECT_NEAR(scale.lower_bound(), 1.0 / 2.5, 1e-15);
  EXPECT_NEAR(scale.upper_bound(), 1.0 / 1.5, 1e-15);
  const Coefficient kb(1.0, {carrying(), migration()}, {});
  EXPECT_DOUBLE_EQ(kb(0.0), 2.0 * 2.4);
  EXPECT_NEAR(kb.lower_bound(), 1.5 * 1.8, 1e-14);
  EXPECT_NEAR(kb.upper_bound(), 2.5 * 2.4, 1e-14);
  EXPECT_FALSE(kb.is_trig_poly());
  EXPECT_THROW(Coefficient(1.0, {TrigPoly(1.0)}, {migration().scaled(0.0)}), std::invalid_argument);
}

TEST(Coefficient, MeanOfNonPolynomialUsesTimeAverage) {
  // mean of 1 / (2 + 0.5 sin) is 1 / sqrt(2^2 - 0.5^2).
  const Coefficient inv(1.0, {TrigPoly(1.0)}, {carrying()});
  EXPECT_NEAR(inv.mean(), 1.0 / std::sqrt(4.0 - 0.25), 1e-4);
  EXPECT_EQ(Coefficient(migration()).mean(), 2.1);
  EXPECT_EQ(Coefficient(migration()).scaled(-2.0).mean(), -4.2);
}
