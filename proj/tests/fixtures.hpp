#pragma once

#include <cmath>
#include <numbers>

#include "qpbif/qpbif.hpp"

namespace fixtures {

using namespace qpbif;

inline TrigPoly carrying() { return TrigPoly(2.0, {Harmonic{0.5, std::sqrt(3.0), 0.0, TrigKind::Sine}}); }
inline TrigPoly migration() { return TrigPoly(2.1, {Harmonic{0.3, 1.0, 0.0, TrigKind::Cosine}}); }

/// Allee growth with migration: r = 1, k = 2 + 0.5 sin(sqrt3 t),
/// b = 2.1 + 0.3 cos t, s = 2.6.
inline PopScenario allee(double eps = 0.0, double x0 = 1.0) {
  PopScenario sc;
  sc.r = TrigPoly(1.0);
  sc.k = carrying();
  sc.b = migration();
  sc.s = 2.6;
  sc.eps = eps;
  sc.x0 = x0;
  return sc;
}

inline CubicField allee_field() { return allee().to_field(); }

/// c == s == 2.6, a = -s b with b = 2.1 + 0.3 cos t.
inline CubicField transcritical_field() { return CubicField::proportional(2.6, migration(), 2.6); }

inline CubicField autonomous(double c, double b, double a) { return CubicField(c, b, a); }

/// Shortened windows for quick structural checks.
inline BranchOptions quick() {
  BranchOptions o;
  o.t_run = 2000.0;
  o.t_eval = 200.0;
  return o;
}

/// x' = lambda x, for tests that need a closed-form solution.
struct Linear {
  double lambda = -1.0;
  struct Frozen {
    double lambda;
    [[nodiscard]] double value(double, double x) const { return lambda * x; }
    [[nodiscard]] double slope(double, double) const { return lambda; }
  };
  [[nodiscard]] Frozen at(double) const { return {lambda}; }
};

/// x' = v, constant drift.
struct Drift {
  double v = -1.0;
  struct Frozen {
    double v;
    [[nodiscard]] double value(double, double) const { return v; }
    [[nodiscard]] double slope(double, double) const { return 0.0; }
  };
  [[nodiscard]] Frozen at(double) const { return {v}; }
};

}  // namespace fixtures
