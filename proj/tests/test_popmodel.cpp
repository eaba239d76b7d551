#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace qpbif;
using namespace fixtures;

namespace {

PopOptions fast() {
  PopOptions po;
  po.branch = quick();
  return po;
}

PopScenario short_run(double eps, double x0) {
  PopScenario sc = allee(eps, x0);
  sc.horizon = 2000.0;
  return sc;
}

}  // namespace

TEST(PopModel, FieldTranslation) {
  const PopScenario sc = allee();
  const CubicField f = sc.to_field();
  for (double t : {0.0, 0.7, -13.0}) {
    for (double x : {-1.0, 0.4, 2.6, 3.1}) {
      const double k = carrying()(t);
      const double b = migration()(t);
      const double direct = -x * x * x / k + x * x + 0.17 * b * (x - 2.6);
      EXPECT_NEAR(f.eval(0.17, t, x), direct, 1e-13);
    }
  }
  EXPECT_EQ(classify_regime(f).kind, Regime::Case1Below);
}

TEST(PopModel, Validation) {
  PopScenario sc = allee();
  sc.k = TrigPoly(0.5, {Harmonic{1.0, 1.0, 0.0, TrigKind::Sine}});
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  sc = allee();
  sc.s = -1.0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  sc = allee(-0.1);
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  EXPECT_NO_THROW(allee(0.1, 0.0).validate());
}

TEST(PopModel, OutcomeExamples) {
  const Outcome a = simulate_population(short_run(0.1, 0.9), fast());
  EXPECT_EQ(a.kind, OutcomeKind::Survival);
  EXPECT_EQ(a.attained, Attained::Upper);
  EXPECT_LE(a.tail_gap, 1e-3);

  const Outcome b = simulate_population(short_run(0.15, 0.9), fast());
  EXPECT_EQ(b.kind, OutcomeKind::Extinction);
  ASSERT_TRUE(b.extinction_time);
  EXPECT_GT(*b.extinction_time, 0.0);
  EXPECT_LE(*b.extinction_time, 2000.0);

  const Outcome c = simulate_population(short_run(0.21, 2.5), fast());
  EXPECT_EQ(c.kind, OutcomeKind::Extinction);

  const Outcome d = simulate_population(short_run(0.1, 0.0), fast());
  EXPECT_EQ(d.kind, OutcomeKind::Extinction);
  EXPECT_EQ(*d.extinction_time, 0.0);
}

TEST(PopModel, ExtinctionTimeMatchesCrossing) {
  const PopScenario sc = short_run(0.15, 0.9);
  const Outcome o = simulate_population(sc, fast());
  ASSERT_TRUE(o.extinction_time);
  const Trajectory tr = rk4_integrate(sc.to_field(), sc.eps, 0.0, sc.x0, *o.extinction_time + 1.0, kDefaultStep);
  const auto t = first_crossing(tr, 0.0);
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, *o.extinction_time, 1e-6);
}

TEST(PopModel, CriticalIntensityExamples) {
  const auto rep = critical_intensity(short_run(0.0, 0.9), 0.9, 0.1, 0.15, fast(), 1e-3);
  EXPECT_GT(rep.lo, 0.1);
  EXPECT_LT(rep.hi, 0.15);
  EXPECT_LE(rep.width(), 1e-3);
  EXPECT_EQ(rep.predicate, "survival");

  EXPECT_THROW(critical_intensity(short_run(0.0, 0.0), 0.0, 0.05, 0.1, fast(), 1e-3), BracketError);

  PopScenario case2 = short_run(0.0, 2.0);
  case2.s = 1.4;
  EXPECT_EQ(classify_regime(case2.to_field()).kind, Regime::Case2Above);
  EXPECT_THROW(critical_intensity(case2, 2.0, 0.1, 5.0, fast(), 1e-3), BracketError);
}

TEST(PopModelProperty, ThresholdAtMiddleBranch) {
  const PopOptions po = fast();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> x(0.01, 3.0);
  for (double eps : {0.05, 0.1, 0.15}) {
    const BranchSet s = branch_set(allee_field(), eps, quick());
    ASSERT_EQ(s.count, 3);
    const double m0 = s.middle->value_at(0.0);
    for (int i = 0; i < 20; ++i) {
      const double x0 = x(rng);
      const Outcome o = simulate_population(short_run(eps, x0), po);
      if (x0 > m0 + po.delta_track) {
        EXPECT_EQ(o.kind, OutcomeKind::Survival) << eps << ' ' << x0;
      }
      if (x0 < m0 - po.delta_track) {
        EXPECT_EQ(o.kind, OutcomeKind::Extinction) << eps << ' ' << x0;
      }
    }
  }
}

TEST(PopModelProperty, NoMigrationMeansSurvival) {
  for (double x0 : {1e-3, 0.5, 5.0}) {
    EXPECT_EQ(simulate_population(short_run(0.0, x0), fast()).kind, OutcomeKind::Survival) << x0;
  }
}

TEST(PopModelProperty, MigrationLowersSteadyPopulation) {
  double prev = INFINITY;
  for (double eps : {0.0, 0.05, 0.1, 0.15, 0.2}) {
    const Outcome o = simulate_population(short_run(eps, 2.5), fast());
    ASSERT_EQ(o.kind, OutcomeKind::Survival) << eps;
    EXPECT_LT(o.attained_level, prev) << eps;
    prev = o.attained_level;
  }
}
