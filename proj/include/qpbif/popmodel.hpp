#pragma once

// Logistic growth with a density-dependent migration term,
//   x' = r(t) x^2 (1 - x / k(t)) + eps b(t) (x - s),
// as a cubic field, plus survival/extinction runs and the critical
// migration intensity for a given initial population.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "qpbif/bifurcate.hpp"

namespace qpbif {

struct PopScenario {
  TrigPoly r{1.0};
  TrigPoly k{1.0};
  TrigPoly b{1.0};
  double s = 1.0;
  double eps = 0.0;
  double x0 = 1.0;
  double horizon = 2e4;

  void validate() const {
    if (!(r.lower_bound() > 0.0)) throw std::invalid_argument("r must be positively bounded below");
    if (!(k.lower_bound() > 0.0)) throw std::invalid_argument("k must be positively bounded below");
    if (!(b.lower_bound() > 0.0)) throw std::invalid_argument("b must be positively bounded below");
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("s must be positive");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be non-negative");
    if (!(x0 >= 0.0) || !std::isfinite(x0)) throw std::invalid_argument("x0 must be non-negative");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
  }

  /// (r/k) (-x^3 + k x^2 + eps (k b / r) (x - s)).
  [[nodiscard]] CubicField to_field() const {
    validate();
    return CubicField::proportional(Coefficient(k), Coefficient(1.0, {k, b}, {r}), s, Coefficient(1.0, {r}, {k}));
  }
};

enum class OutcomeKind { Survival, Extinction, Undetermined };
enum class Attained { Upper, Lower, None };

inline const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Survival: return "survival";
    case OutcomeKind::Extinction: return "extinction";
    case OutcomeKind::Undetermined: return "undetermined";
  }
  return "?";
}

inline const char* to_string(Attained a) {
  switch (a) {
    case Attained::Upper: return "upper";
    case Attained::Lower: return "lower";
    case Attained::None: return "none";
  }
  return "?";
}

struct Outcome {
  OutcomeKind kind = OutcomeKind::Undetermined;
  std::optional<double> extinction_time;
  Attained attained = Attained::None;
  /// x at the horizon (or 0 at extinction).
  double attained_level = 0.0;
  /// Largest distance from the upper branch over the tail window.
  double tail_gap = 0.0;
};

struct PopOptions {
  BranchOptions branch;
  double delta_track = 1e-3;
  double tail_fraction = 0.1;
};

/// Forward run from (0, x0). Extinction is the first crossing of 0, where
/// the run stops. Survival needs the tail [(1 - tail_fraction) horizon,
/// horizon] to stay within delta_track of the upper branch, located by a
/// pullback run started t_run before the tail.
inline Outcome simulate_outcome(const CubicField& f, double eps, double x0, double horizon,
                                const PopOptions& po = {}) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(po.tail_fraction > 0.0 && po.tail_fraction < 1.0)) throw std::invalid_argument("tail fraction outside (0, 1)");
  const BranchOptions& opt = po.branch;
  const double h = opt.h;
  const double t_tail = (1.0 - po.tail_fraction) * horizon;
  const double t_seed = std::min(0.0, t_tail - opt.t_run);
  const double r2 = bracket_constants(f, eps).r2;

  const std::int64_t n = detail::grid_steps(horizon - t_seed, h);
  const std::int64_t i_pop = detail::grid_steps(0.0 - t_seed, h);
  const std::int64_t i_upper = detail::grid_steps((t_tail - opt.t_run) - t_seed, h);
  const std::int64_t i_tail = detail::grid_steps(t_tail - t_seed, h);

  Outcome out;
  double prev = x0;
  double prev_t = 0.0;
  const auto end =
      rk4_lanes<2>(f, eps, t_seed, h, n, opt.x_max, {LaneSeed{i_pop, x0}, LaneSeed{i_upper, r2}},
                   [&](std::int64_t i, double t, const std::array<double, 2>& x, const std::array<bool, 2>& live,
                       const auto&) {
                     if (i < i_pop || !live[0]) return true;
                     if (x[0] < 0.0 || (x[0] == 0.0 && eps > 0.0)) {
                       out.extinction_time = i == i_pop ? 0.0 : prev_t + (t - prev_t) * prev / (prev - x[0]);
                       return false;
                     }
                     prev = x[0];
                     prev_t = t;
                     if (i >= i_tail) out.tail_gap = std::max(out.tail_gap, std::abs(x[0] - x[1]));
                     return true;
                   });
  if (end[0].escape) throw IntegrationError("population run escaped");
  if (out.extinction_time) {
    out.kind = OutcomeKind::Extinction;
    out.attained = Attained::Lower;
    out.attained_level = 0.0;
    return out;
  }
  out.attained_level = end[0].x;
  if (out.tail_gap <= po.delta_track) {
    out.kind = OutcomeKind::Survival;
    out.attained = Attained::Upper;
  }
  return out;
}

inline Outcome simulate_population(const PopScenario& sc, const PopOptions& po = {}) {
  return simulate_outcome(sc.to_field(), sc.eps, sc.x0, sc.horizon, po);
}

/// Bracket the migration intensity at which an initial population x0 stops
/// surviving. Undetermined outcomes count as not surviving and are flagged.
inline BifurcationReport critical_intensity(PopScenario sc, double x0, double eps_lo, double eps_hi,
                                            const PopOptions& po = {}, double target_width = 1e-6) {
  sc.x0 = x0;
  BisectOptions bo;
  bo.target_width = target_width;
  bo.shortcut = false;
  return bisect_predicate(
      [&](double e, bool) {
        PopScenario run = sc;
        run.eps = e;
        const Outcome o = simulate_population(run, po);
        Probe p;
        p.epsilon = e;
        p.value = o.kind == OutcomeKind::Survival;
        p.flagged = o.kind == OutcomeKind::Undetermined;
        p.note = to_string(o.kind);
        return p;
      },
      eps_lo, eps_hi, bo, "survival");
}

}  // namespace qpbif
