#pragma once

// Bifurcation values by bisection on branch predicates, parameter sweeps,
// and the closed-form bifurcation set of autonomous cubics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qpbif/branches.hpp"
#include "qpbif/lyapunov.hpp"

namespace qpbif {

/// Raised when a bisection cannot start or cannot finish.
class PredicateError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class BracketError : public PredicateError {
  using PredicateError::PredicateError;
};

class BudgetError : public PredicateError {
  using PredicateError::PredicateError;
};

/// Compact record of a branch set, kept as bisection evidence.
struct BranchSummary {
  double epsilon = 0.0;
  int count = 0;
  bool converged = false;
  double sep_upper_middle = 0.0;
  double sep_middle_lower = 0.0;
  double sep_upper_lower = 0.0;
  double max_drift = 0.0;
  std::optional<double> l0;
  std::optional<double> m0;
  std::optional<double> u0;
};

inline std::optional<double> value_at_zero(const std::optional<Branch>& b) {
  if (!b) return std::nullopt;
  return b->value_at(0.0);
}

inline BranchSummary summarize(const BranchSet& s) {
  BranchSummary w;
  w.epsilon = s.epsilon;
  w.count = s.count;
  w.converged = s.converged;
  w.sep_upper_middle = s.sep_upper_middle;
  w.sep_middle_lower = s.sep_middle_lower;
  w.sep_upper_lower = s.sep_upper_lower;
  for (const auto* b : {&s.lower, &s.middle, &s.upper}) {
    if (*b) w.max_drift = std::max(w.max_drift, (*b)->drift);
  }
  // Branches only carry samples around t = 0 when the window covers it.
  w.l0 = value_at_zero(s.lower);
  w.m0 = value_at_zero(s.middle);
  w.u0 = value_at_zero(s.upper);
  return w;
}

/// One predicate evaluation.
struct Probe {
  double epsilon = 0.0;
  bool value = false;
  /// Set when the evaluation could not be settled cleanly (for example the
  /// branches did not converge) and the value is a fallback.
  bool flagged = false;
  std::optional<BranchSummary> branches;
  std::string note;
};

/// Three branches whose mutual gaps exceed delta_sep and also exceed the
/// drift of the runs that located them. A gap smaller than that drift cannot
/// be told apart from a slow passage near a fold.
inline bool three_branches(const BranchSet& s, double delta_sep) {
  if (s.count != 3 || !s.upper || !s.middle || !s.lower) return false;
  const double du = s.upper->drift;
  const double dm = s.middle->drift;
  const double dl = s.lower->drift;
  return s.sep_upper_middle > std::max(delta_sep, du + dm) && s.sep_middle_lower > std::max(delta_sep, dm + dl);
}

inline Probe probe_three_branches(const CubicField& f, double eps, const BranchOptions& opt) {
  const BranchSet s = branch_set(f, eps, opt);
  Probe p;
  p.epsilon = eps;
  p.value = three_branches(s, opt.delta_sep);
  p.flagged = !s.converged;
  p.branches = summarize(s);
  p.note = s.notes;
  return p;
}

inline bool has_three_branches(const CubicField& f, double eps, const BranchOptions& opt = {}) {
  return probe_three_branches(f, eps, opt).value;
}

/// Upper and lower attractive branches distinct by more than delta_sep.
inline Probe probe_branch_separation(const CubicField& f, double eps, const BranchOptions& opt) {
  const BranchSet s = branch_set(f, eps, opt);
  Probe p;
  p.epsilon = eps;
  p.value = s.count >= 2 && s.sep_upper_lower > opt.delta_sep;
  p.flagged = !s.converged;
  p.branches = summarize(s);
  p.note = s.notes;
  return p;
}

/// Truncated Lyapunov exponent of the constant solution x == z over [0, T]
/// is negative.
template <ScalarField F>
Probe probe_constant_attractive(const F& f, double eps, double z, double T, const BranchOptions& opt) {
  const std::int64_t n = detail::grid_steps(T, opt.report_step);
  const std::vector<double> I =
      detail::constant_integral(f, eps, z, 0.0, static_cast<std::size_t>(n) + 1, opt.report_step, opt.h);
  Probe p;
  p.epsilon = eps;
  p.value = I.back() / T < 0.0;
  p.note = "exponent " + std::to_string(I.back() / T);
  return p;
}

struct BisectOptions {
  double target_width = 1e-12;
  int max_iterations = 60;
  /// Use shortened windows while the bracket is wider than coarse_width.
  bool shortcut = true;
  double coarse_t_run = 2e3;
  double coarse_width = 1e-6;
};

struct BifurcationReport {
  std::string predicate;
  double lo = 0.0;
  double hi = 0.0;
  bool value_lo = false;
  bool value_hi = false;
  int iterations = 0;
  int evaluations = 0;
  double target_width = 0.0;
  Probe witness_lo;
  Probe witness_hi;
  /// Midpoints whose predicate value is a fallback.
  std::vector<double> flagged;
  /// Ends re-evaluated when switching from shortened to full windows.
  int widenings = 0;

  [[nodiscard]] double midpoint() const { return 0.5 * (lo + hi); }
  [[nodiscard]] double width() const { return hi - lo; }
};

/// Bisection on eval(eps, full) -> Probe, where `full` asks for the full
/// evaluation rather than the cheap one. The cheap one is only used while
/// the bracket is wide; on switching, both ends are re-checked and the
/// bracket widened if the cheap evaluation had moved the sign change.
template <class Eval>
BifurcationReport bisect_predicate(Eval&& eval, double lo, double hi, const BisectOptions& bo, std::string name) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw BracketError("bracket must satisfy lo < hi");
  if (!(bo.target_width > 0.0)) throw BracketError("target width must be positive");
  BifurcationReport rep;
  rep.predicate = std::move(name);
  rep.target_width = bo.target_width;

  const double lo0 = lo;
  const double hi0 = hi;
  const auto needs_full = [&](double width) {
    if (!bo.shortcut || width <= bo.coarse_width) return true;
    // The last two halvings always use the full evaluation.
    return width / 4.0 <= bo.target_width;
  };
  const auto run = [&](double e, bool full) {
    ++rep.evaluations;
    return eval(e, full);
  };

  bool full = needs_full(hi - lo);
  Probe plo = run(lo, full);
  Probe phi = run(hi, full);
  if (plo.value == phi.value) {
    throw BracketError("predicate '" + rep.predicate + "' has the same value at both ends");
  }
  const bool want_lo = plo.value;

  // Walk one end outwards with doubling steps until the full evaluation
  // agrees with the value that end is meant to carry.
  const auto widen = [&](double& end, Probe& p, double& other, Probe& po, bool want, double limit, double dir) {
    double step = hi - lo;
    po = p;
    other = end;
    while (p.value != want) {
      if (end == limit) throw BracketError("sign change left the starting bracket under full evaluation");
      end = dir < 0 ? std::max(limit, end - step) : std::min(limit, end + step);
      p = run(end, true);
      step *= 2.0;
      ++rep.widenings;
    }
  };

  while (hi - lo > bo.target_width) {
    if (!full && needs_full(hi - lo)) {
      full = true;
      plo = run(lo, true);
      phi = run(hi, true);
      if (plo.value != want_lo && phi.value == want_lo) {
        throw BracketError("predicate reversed between shortened and full evaluation");
      }
      if (plo.value != want_lo) {
        widen(lo, plo, hi, phi, want_lo, lo0, -1.0);
      } else if (phi.value == want_lo) {
        widen(hi, phi, lo, plo, !want_lo, hi0, 1.0);
      }
      continue;
    }
    if (rep.iterations >= bo.max_iterations) {
      throw BudgetError("bisection budget of " + std::to_string(bo.max_iterations) + " iterations exhausted");
    }
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;  // bracket at floating-point resolution
    Probe pm = run(mid, full);
    ++rep.iterations;
    if (pm.flagged) rep.flagged.push_back(mid);
    if (pm.value == plo.value) {
      lo = mid;
      plo = std::move(pm);
    } else {
      hi = mid;
      phi = std::move(pm);
    }
  }
  rep.lo = lo;
  rep.hi = hi;
  rep.value_lo = plo.value;
  rep.value_hi = phi.value;
  rep.witness_lo = std::move(plo);
  rep.witness_hi = std::move(phi);
  return rep;
}

/// Branch options for the shortened windows used early in a bisection.
inline BranchOptions coarse_options(const BranchOptions& opt, const BisectOptions& bo) {
  BranchOptions c = opt;
  if (bo.coarse_t_run >= opt.t_run) return c;
  c.t_run = bo.coarse_t_run;
  const double ratio = bo.coarse_t_run / opt.t_run;
  // Keep the evaluation window on the report grid.
  c.t_eval = std::max(opt.report_step, std::round(opt.t_eval * ratio / opt.report_step) * opt.report_step);
  return c;
}

inline BifurcationReport bisect_bifurcation(const CubicField& f, double eps_lo, double eps_hi,
                                            const BranchOptions& opt = {}, const BisectOptions& bo = {}) {
  const BranchOptions coarse = coarse_options(opt, bo);
  return bisect_predicate(
      [&](double e, bool full) { return probe_three_branches(f, e, full ? opt : coarse); }, eps_lo, eps_hi, bo,
      "three_branches");
}

inline BifurcationReport bisect_separation(const CubicField& f, double eps_lo, double eps_hi,
                                           const BranchOptions& opt = {}, const BisectOptions& bo = {}) {
  const BranchOptions coarse = coarse_options(opt, bo);
  return bisect_predicate(
      [&](double e, bool full) { return probe_branch_separation(f, e, full ? opt : coarse); }, eps_lo, eps_hi, bo,
      "branch_separation");
}

/// Where the constant solution x == s of a constant-ratio field with c == s
/// changes from attractive to repulsive, judged by the sign of its truncated
/// exponent over [0, T].
inline BifurcationReport bisect_transcritical(const CubicField& f, double eps_lo, double eps_hi, double T = 1e4,
                                              const BranchOptions& opt = {}, BisectOptions bo = {}) {
  const RegimeClass rc = classify_regime(f);
  if (rc.kind != Regime::Case3Transcritical) throw HypothesisError("field is not of transcritical type");
  const double s = *f.ratio();
  bo.shortcut = false;
  return bisect_predicate([&](double e, bool) { return probe_constant_attractive(f, e, s, T, opt); }, eps_lo,
                          eps_hi, bo, "constant_branch_attractive");
}

/// Epsilon values at which -x^3 + c x^2 + eps (b x + a) has a repeated root:
/// eps = 0 and the real roots of
/// 4 b^3 eps^2 + (b^2 c^2 - 18 a b c - 27 a^2) eps - 4 a c^3 = 0.
inline std::vector<double> autonomous_bifurcations(double c, double b, double a) {
  std::vector<double> r{0.0};
  const double q2 = 4.0 * b * b * b;
  const double q1 = b * b * c * c - 18.0 * a * b * c - 27.0 * a * a;
  const double q0 = -4.0 * a * c * c * c;
  if (q2 == 0.0) {
    if (q1 != 0.0) r.push_back(-q0 / q1);
  } else {
    const double disc = q1 * q1 - 4.0 * q2 * q0;
    if (disc >= 0.0) {
      const double q = -0.5 * (q1 + std::copysign(std::sqrt(disc), q1));
      if (q != 0.0) {
        r.push_back(q / q2);
        r.push_back(q0 / q);
      } else {
        r.push_back(0.0);
      }
    }
  }
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

struct ScanRow {
  double epsilon = 0.0;
  int count = 0;
  bool converged = false;
  std::optional<double> l0;
  std::optional<double> m0;
  std::optional<double> u0;
  double sep_upper_middle = 0.0;
  double sep_middle_lower = 0.0;
  double sep_upper_lower = 0.0;
  std::optional<LyapBounds> lyap_l;
  std::optional<LyapBounds> lyap_m;
  std::optional<LyapBounds> lyap_u;
  std::optional<Stability> stab_l;
  std::optional<Stability> stab_m;
  std::optional<Stability> stab_u;
  std::string notes;
  /// Non-empty when the row failed; the other fields are then unset.
  std::string error;

  [[nodiscard]] bool ok() const { return error.empty(); }
};

inline ScanRow scan_row(const CubicField& f, double eps, const BranchOptions& opt) {
  ScanRow row;
  row.epsilon = eps;
  try {
    BranchSet s = branch_set(f, eps, opt);
    classify_stability(f, s);
    row.count = s.count;
    row.converged = s.converged;
    row.l0 = value_at_zero(s.lower);
    row.m0 = value_at_zero(s.middle);
    row.u0 = value_at_zero(s.upper);
    row.sep_upper_middle = s.sep_upper_middle;
    row.sep_middle_lower = s.sep_middle_lower;
    row.sep_upper_lower = s.sep_upper_lower;
    if (s.lower) {
      row.lyap_l = s.lower->lyap;
      row.stab_l = s.lower->stability;
    }
    if (s.middle) {
      row.lyap_m = s.middle->lyap;
      row.stab_m = s.middle->stability;
    }
    if (s.upper) {
      row.lyap_u = s.upper->lyap;
      row.stab_u = s.upper->stability;
    }
    row.notes = s.notes;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// One row per epsilon, in grid order, using up to `jobs` worker threads
/// (0 picks the hardware concurrency).
inline std::vector<ScanRow> sweep(const CubicField& f, const std::vector<double>& grid, const BranchOptions& opt = {},
                                  unsigned jobs = 1) {
  std::vector<ScanRow> rows(grid.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(grid.size(), 1)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) rows[i] = scan_row(f, grid[i], opt);
    return rows;
  }
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < grid.size(); i += jobs) rows[i] = scan_row(f, grid[i], opt);
    }));
  }
  for (auto& w : workers) w.get();
  return rows;
}

}  // namespace qpbif
