#pragma once

// Bounded solutions of the cubic field located by pullback: long forward
// runs from the bracketing constants give the attractive branches, a long
// backward run from between them gives the repulsive one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpbif/field.hpp"
#include "qpbif/integrate.hpp"

namespace qpbif {

struct BranchOptions {
  double h = kDefaultStep;
  double t_run = 1e4;
  double t_eval = 1e3;
  double x_max = kDefaultEscape;
  double delta_sep = 1e-6;
  double delta_match = 1e-8;
  /// Spacing of the stored report grid; must be an even number of steps.
  double report_step = 1.0;
  /// Non-converged branches this close to an exact constant solution are
  /// replaced by it.
  double snap_tolerance = 1e-3;
  /// Refuse branch location unless c > 0 and a < 0 are certified.
  bool check_hypotheses = true;
};

enum class Stability { Attractive, Repulsive, Undetermined };
enum class BranchSource { ForwardUpper, ForwardLower, BackwardMid };
enum class Side { Upper, Lower };
enum class LyapSign { Negative, Positive, StraddlesZero };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::Attractive: return "attractive";
    case Stability::Repulsive: return "repulsive";
    case Stability::Undetermined: return "undetermined";
  }
  return "?";
}

inline const char* to_string(BranchSource s) {
  switch (s) {
    case BranchSource::ForwardUpper: return "forward-upper";
    case BranchSource::ForwardLower: return "forward-lower";
    case BranchSource::BackwardMid: return "backward-mid";
  }
  return "?";
}

inline const char* to_string(LyapSign s) {
  switch (s) {
    case LyapSign::Negative: return "negative";
    case LyapSign::Positive: return "positive";
    case LyapSign::StraddlesZero: return "straddles_zero";
  }
  return "?";
}

/// Min and max of the truncated exponents over [origin + tau, origin + T].
struct LyapBounds {
  double gamma_l = 0.0;
  double gamma_u = 0.0;
  double T = 0.0;
  double tau = 0.0;
  double origin = 0.0;
  LyapSign sign = LyapSign::StraddlesZero;

  static LyapSign sign_of(double lo, double hi) {
    if (hi < 0.0) return LyapSign::Negative;
    if (lo > 0.0) return LyapSign::Positive;
    return LyapSign::StraddlesZero;
  }
};

struct Branch {
  BranchSource source = BranchSource::ForwardUpper;
  Stability stability = Stability::Undetermined;
  double t_start = 0.0;  ///< left end of the evaluation window
  double step = 1.0;     ///< report grid spacing
  std::vector<double> samples;
  /// Running integral of df/dx along the branch from t_start, at full step
  /// resolution (composite Simpson), sampled on the report grid.
  std::vector<double> exp_integral;

  // Where the locating run started, so the branch can be regenerated.
  double seed_t = 0.0;
  double seed_x = 0.0;
  double h = kDefaultStep;
  // State at the far end of the locating run and at the probe time used by
  // the repulsive locator's confirmation run.
  double far_t = 0.0;
  double far_x = 0.0;
  double probe_t = 0.0;
  double probe_x = 0.0;

  /// Max disagreement with a second run started at a different time.
  double drift = std::numeric_limits<double>::infinity();
  bool converged = false;
  /// Replaced by an exact constant solution of the field.
  bool exact = false;
  std::optional<LyapBounds> lyap;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double t_end() const { return time_at(samples.size() - 1); }
  [[nodiscard]] double time_at(std::size_t i) const { return t_start + static_cast<double>(i) * step; }
  [[nodiscard]] Direction direction() const {
    return source == BranchSource::BackwardMid ? Direction::Backward : Direction::Forward;
  }

  /// Linear interpolation on the report grid; t must lie in the window.
  [[nodiscard]] double value_at(double t) const {
    const double u = (t - t_start) / step;
    if (u < -1e-9 || u > static_cast<double>(samples.size() - 1) + 1e-9) {
      throw std::out_of_range("time outside the branch window");
    }
    const auto i = std::min(static_cast<std::size_t>(std::max(u, 0.0)), samples.size() - 1);
    if (i + 1 >= samples.size()) return samples.back();
    const double w = u - static_cast<double>(i);
    return samples[i] + w * (samples[i + 1] - samples[i]);
  }

  [[nodiscard]] double min() const { return *std::min_element(samples.begin(), samples.end()); }
  [[nodiscard]] double max() const { return *std::max_element(samples.begin(), samples.end()); }
};

/// min over the window of (upper - lower).
inline double min_gap(const Branch& upper, const Branch& lower) {
  double g = std::numeric_limits<double>::infinity();
  const std::size_t n = std::min(upper.samples.size(), lower.samples.size());
  for (std::size_t i = 0; i < n; ++i) g = std::min(g, upper.samples[i] - lower.samples[i]);
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  if (a.size() != b.size()) d = std::numeric_limits<double>::infinity();
  return d;
}

struct BranchSet {
  double epsilon = 0.0;
  std::optional<Branch> lower;
  std::optional<Branch> middle;
  std::optional<Branch> upper;
  int count = 0;
  /// min over the window of (upper - middle) and (middle - lower); +inf
  /// where the pair does not exist.
  double sep_upper_middle = std::numeric_limits<double>::infinity();
  double sep_middle_lower = std::numeric_limits<double>::infinity();
  double sep_upper_lower = std::numeric_limits<double>::infinity();
  /// Every present branch forgot its initial condition within delta_match.
  bool converged = true;
  std::string notes;

  [[nodiscard]] double separation() const { return std::min(sep_upper_middle, sep_middle_lower); }
};

class HypothesisError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct WindowRecord {
  std::vector<double> x;
  std::vector<double> integral;
  double far_x = 0.0;
  double probe_x = std::numeric_limits<double>::quiet_NaN();
  std::optional<Escape> escape;
};

inline std::int64_t grid_steps(double span, double h) {
  const double r = std::abs(span) / h;
  const auto n = std::llround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-6) {
    throw std::invalid_argument("window boundaries must sit on the integration grid");
  }
  return n;
}

struct WindowSeed {
  double t = 0.0;
  double x = 0.0;
  std::optional<double> probe_t;
};

/// Integrate every seed to t_stop on one shared grid, recording x and the
/// running Simpson integral of df/dx on [t_lo, t_hi] (ascending time,
/// integral measured from t_lo) every `report_step`. All seeds lie on the
/// same side of the window.
template <std::size_t N, ScalarField F>
std::array<WindowRecord, N> run_windows(const F& f, double eps, const std::array<WindowSeed, N>& seeds,
                                        double t_stop, double t_lo, double t_hi, double report_step, double h,
                                        double x_max) {
  const bool forward = t_stop >= seeds[0].t;
  double t0 = seeds[0].t;
  for (const auto& sd : seeds) {
    if ((t_stop >= sd.t) != forward) throw std::invalid_argument("seeds on both sides of the stop time");
    t0 = forward ? std::min(t0, sd.t) : std::max(t0, sd.t);
  }
  const std::int64_t k = grid_steps(report_step, h);
  if (k % 2 != 0) throw std::invalid_argument("report step must be an even number of integration steps");
  const std::int64_t n = grid_steps(t_stop - t0, h);
  // Stream indices where the window is entered and left.
  const std::int64_t i_in = grid_steps((forward ? t_lo : t_hi) - t0, h);
  const std::int64_t i_out = grid_steps((forward ? t_hi : t_lo) - t0, h);
  if (i_out > n) throw std::invalid_argument("run stops before the window ends");

  std::array<LaneSeed, N> lanes{};
  std::array<std::int64_t, N> i_probe{};
  for (std::size_t j = 0; j < N; ++j) {
    lanes[j] = LaneSeed{grid_steps(seeds[j].t - t0, h), seeds[j].x};
    if (lanes[j].join > i_in) throw std::invalid_argument("seed lies inside the window");
    i_probe[j] = seeds[j].probe_t ? grid_steps(*seeds[j].probe_t - t0, h) : -1;
  }

  std::array<WindowRecord, N> rec{};
  const auto n_rep = static_cast<std::size_t>((i_out - i_in) / k + 1);
  for (auto& r : rec) {
    r.x.reserve(n_rep);
    r.integral.reserve(n_rep);
  }
  std::array<double, N> acc{};
  std::array<double, N> g1{};  // df/dx one step back
  std::array<double, N> g2{};  // two steps back
  const double dt = forward ? h : -h;
  const auto end = rk4_lanes<N>(
      f, eps, t0, dt, n, x_max, lanes,
      [&](std::int64_t i, double, const std::array<double, N>& x, const std::array<bool, N>& live, const auto& s) {
        for (std::size_t l = 0; l < N; ++l) {
          if (i == i_probe[l] && live[l]) rec[l].probe_x = x[l];
        }
        if (i < i_in || i > i_out) return;
        const std::int64_t j = i - i_in;
        const bool simpson = j > 0 && j % 2 == 0;
        const bool report = j % k == 0;
        for (std::size_t l = 0; l < N; ++l) {
          const double g = s.slope(eps, x[l]);
          if (simpson) acc[l] += h / 3.0 * (g2[l] + 4.0 * g1[l] + g);
          g2[l] = g1[l];
          g1[l] = g;
          if (report) {
            rec[l].x.push_back(x[l]);
            rec[l].integral.push_back(acc[l]);
          }
        }
      });
  for (std::size_t l = 0; l < N; ++l) {
    WindowRecord& r = rec[l];
    r.far_x = end[l].x;
    r.escape = end[l].escape;
    if (forward) continue;
    std::reverse(r.x.begin(), r.x.end());
    std::reverse(r.integral.begin(), r.integral.end());
    // Accumulated from t_hi downwards; re-base at t_lo.
    if (!r.integral.empty()) {
      const double total = r.integral.front();
      for (auto& v : r.integral) v = total - v;
    }
  }
  return rec;
}

template <ScalarField F>
WindowRecord run_window(const F& f, double eps, double t_seed, double x_seed, double t_stop, double t_lo,
                        double t_hi, double report_step, double h, double x_max,
                        std::optional<double> probe_t = std::nullopt) {
  return run_windows<1>(f, eps, {WindowSeed{t_seed, x_seed, probe_t}}, t_stop, t_lo, t_hi, report_step, h,
                        x_max)[0];
}

/// Simpson integral of df/dx along x == z over the report grid of a window.
template <ScalarField F>
std::vector<double> constant_integral(const F& f, double eps, double z, double t_lo, std::size_t n_rep,
                                      double report_step, double h) {
  const std::int64_t k = grid_steps(report_step, h);
  std::vector<double> out{0.0};
  double acc = 0.0;
  for (std::size_t r = 1; r < n_rep; ++r) {
    for (std::int64_t j = 0; j < k; j += 2) {
      const double t = t_lo + static_cast<double>(r - 1) * report_step + static_cast<double>(j) * h;
      acc += h / 3.0 * (f.at(t).slope(eps, z) + 4.0 * f.at(t + h).slope(eps, z) + f.at(t + 2.0 * h).slope(eps, z));
    }
    out.push_back(acc);
  }
  return out;
}

}  // namespace detail

/// Constant solutions known structurally: 0 when eps * a vanishes
/// identically, s when c == s and a == -s b.
inline std::vector<double> exact_constant_solutions(const CubicField& f, double eps) {
  std::vector<double> z;
  const Interval ab = f.a().bounds();
  if (eps == 0.0 || (ab.lo == 0.0 && ab.hi == 0.0)) z.push_back(0.0);
  if (f.ratio() && f.c().is_constant()) {
    const Interval cb = f.c().bounds();
    if (cb.lo == *f.ratio() && cb.hi == *f.ratio()) z.push_back(*f.ratio());
  }
  return z;
}

inline void require_hypotheses(const CubicField& f) {
  const RegimeClass rc = classify_regime(f);
  if (!rc.admits_branches()) {
    throw HypothesisError("branch location needs c > 0 and a < 0; failed: " + rc.failed_hypotheses());
  }
}

namespace detail {

inline void check_windows(const BranchOptions& opt) {
  if (!(opt.t_eval > 0.0 && opt.t_run > opt.t_eval)) throw std::invalid_argument("need 0 < t_eval < t_run");
}

inline double probe_time(const BranchOptions& opt) { return 0.5 * (opt.t_run + opt.t_eval); }

/// Main pullback run from -t_run plus a confirmation run from the later
/// time -probe, both starting at x_start.
inline std::array<WindowSeed, 2> attractive_seeds(double x_start, const BranchOptions& opt) {
  return {WindowSeed{-opt.t_run, x_start, probe_time(opt)}, WindowSeed{-probe_time(opt), x_start, std::nullopt}};
}

inline Branch attractive_branch(const WindowRecord& main, const WindowRecord& confirm, double x_start, Side side,
                                const BranchOptions& opt) {
  if (main.escape || confirm.escape) {
    throw IntegrationError("forward run escaped while locating an attractive branch");
  }
  Branch b;
  b.source = side == Side::Upper ? BranchSource::ForwardUpper : BranchSource::ForwardLower;
  b.t_start = -opt.t_eval;
  b.step = opt.report_step;
  b.samples = main.x;
  b.exp_integral = main.integral;
  b.seed_t = -opt.t_run;
  b.seed_x = x_start;
  b.h = opt.h;
  b.far_t = opt.t_run;
  b.far_x = main.far_x;
  b.probe_t = probe_time(opt);
  b.probe_x = main.probe_x;
  b.drift = max_abs_diff(main.x, confirm.x);
  b.converged = b.drift <= opt.delta_match;
  b.stability = b.converged ? Stability::Attractive : Stability::Undetermined;
  return b;
}

}  // namespace detail

/// Attractive branch by pullback from the upper or lower bracketing constant.
template <ScalarField F>
Branch locate_attractive_from(const F& f, double eps, double x_start, Side side, const BranchOptions& opt) {
  detail::check_windows(opt);
  const auto rec = detail::run_windows<2>(f, eps, detail::attractive_seeds(x_start, opt), opt.t_run, -opt.t_eval,
                                          opt.t_eval, opt.report_step, opt.h, opt.x_max);
  return detail::attractive_branch(rec[0], rec[1], x_start, side, opt);
}

/// Both attractive branches from one shared integration grid.
template <ScalarField F>
std::pair<Branch, Branch> locate_attractive_pair(const F& f, double eps, double x_lower, double x_upper,
                                                 const BranchOptions& opt) {
  detail::check_windows(opt);
  const auto up = detail::attractive_seeds(x_upper, opt);
  const auto lo = detail::attractive_seeds(x_lower, opt);
  const auto rec = detail::run_windows<4>(f, eps, {up[0], up[1], lo[0], lo[1]}, opt.t_run, -opt.t_eval,
                                          opt.t_eval, opt.report_step, opt.h, opt.x_max);
  return {detail::attractive_branch(rec[2], rec[3], x_lower, Side::Lower, opt),
          detail::attractive_branch(rec[0], rec[1], x_upper, Side::Upper, opt)};
}

inline Branch locate_attractive(const CubicField& f, double eps, Side side, const BranchOptions& opt = {}) {
  if (opt.check_hypotheses) require_hypotheses(f);
  const Bracket br = bracket_constants(f, eps);
  return locate_attractive_from(f, eps, side == Side::Upper ? br.r2 : br.r1, side, opt);
}

/// Repulsive branch between two attractive ones, by a backward run from
/// their midpoint at t_run. Absent when the backward run escapes or leaves
/// the strip between them.
template <ScalarField F>
std::optional<Branch> locate_repulsive(const F& f, double eps, const Branch& lower, const Branch& upper,
                                       const BranchOptions& opt = {}) {
  if (!(upper.far_x - lower.far_x > opt.delta_sep) || !(upper.probe_x - lower.probe_x > opt.delta_sep) ||
      !(min_gap(upper, lower) > opt.delta_sep)) {
    return std::nullopt;
  }
  const double x_far = 0.5 * (upper.far_x + lower.far_x);
  const double x_probe = 0.5 * (upper.probe_x + lower.probe_x);
  const auto rec = detail::run_windows<2>(
      f, eps, {detail::WindowSeed{opt.t_run, x_far, std::nullopt}, detail::WindowSeed{upper.probe_t, x_probe, std::nullopt}},
      -opt.t_eval, -opt.t_eval, opt.t_eval, opt.report_step, opt.h, opt.x_max);
  const detail::WindowRecord& main = rec[0];
  const detail::WindowRecord& confirm = rec[1];
  if (main.escape || confirm.escape) return std::nullopt;

  Branch b;
  b.source = BranchSource::BackwardMid;
  b.t_start = -opt.t_eval;
  b.step = opt.report_step;
  b.samples = main.x;
  b.exp_integral = main.integral;
  b.seed_t = opt.t_run;
  b.seed_x = x_far;
  b.h = opt.h;
  b.far_t = -opt.t_eval;
  b.far_x = main.far_x;
  b.probe_t = upper.probe_t;
  b.probe_x = x_probe;
  b.drift = max_abs_diff(main.x, confirm.x);
  b.converged = b.drift <= opt.delta_match;
  b.stability = b.converged ? Stability::Repulsive : Stability::Undetermined;
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    if (!(lower.samples[i] < b.samples[i] && b.samples[i] < upper.samples[i])) return std::nullopt;
  }
  return b;
}

/// Upper/lower attractive branches, the repulsive one between them when it
/// exists, and the resulting count of distinct bounded solutions.
inline BranchSet branch_set(const CubicField& f, double eps, const BranchOptions& opt = {}) {
  if (opt.check_hypotheses) require_hypotheses(f);
  const Bracket br = bracket_constants(f, eps);

  BranchSet set;
  set.epsilon = eps;
  auto [lower, upper] = locate_attractive_pair(f, eps, br.r1, br.r2, opt);

  set.sep_upper_lower = min_gap(upper, lower);
  if (set.sep_upper_lower <= opt.delta_sep) {
    set.upper = std::move(upper);
    set.count = 1;
    set.converged = set.upper->converged;
    set.notes = "forward runs from both bracketing constants coincide";
    return set;
  }

  std::optional<Branch> middle = locate_repulsive(f, eps, lower, upper, opt);

  std::vector<Branch*> present{&lower, &upper};
  if (middle) present.push_back(&*middle);
  for (double z : exact_constant_solutions(f, eps)) {
    for (Branch* b : present) {
      if (b->converged) continue;
      bool near = true;
      for (double v : b->samples) near = near && std::abs(v - z) <= opt.snap_tolerance;
      if (!near) continue;
      std::fill(b->samples.begin(), b->samples.end(), z);
      b->exp_integral = detail::constant_integral(f, eps, z, b->t_start, b->samples.size(), b->step, b->h);
      b->exact = true;
      b->converged = true;
      b->drift = 0.0;
      set.notes += "snapped a branch onto the exact constant solution; ";
    }
  }

  set.sep_upper_lower = min_gap(upper, lower);
  if (middle) {
    set.sep_upper_middle = min_gap(upper, *middle);
    set.sep_middle_lower = min_gap(*middle, lower);
    if (set.sep_middle_lower <= opt.delta_sep || set.sep_upper_middle <= opt.delta_sep) {
      middle.reset();
      set.sep_upper_middle = set.sep_middle_lower = std::numeric_limits<double>::infinity();
      set.notes += "repulsive candidate merged with an attractive branch; ";
    }
  }
  if (set.sep_upper_lower <= opt.delta_sep) {
    set.upper = std::move(upper);
    set.count = 1;
    set.converged = set.upper->converged;
    return set;
  }

  set.converged = upper.converged && lower.converged && (!middle || middle->converged);
  set.upper = std::move(upper);
  set.lower = std::move(lower);
  set.middle = std::move(middle);
  set.count = set.middle ? 3 : 2;
  if (!set.converged) set.notes += "convergence not reached within delta_match; ";
  return set;
}

/// Earliest time the trajectory reaches `level`, interpolated linearly
/// between adjacent samples.
inline std::optional<double> first_crossing(const Trajectory& tr, double level) {
  if (tr.samples.empty()) return std::nullopt;
  if (tr.samples.front() == level) return tr.t0;
  double prev_t = tr.t0;
  double prev_x = tr.samples.front();
  const auto check = [&](double t, double x) -> std::optional<double> {
    const double a = prev_x - level;
    const double b = x - level;
    if (b == 0.0) return t;
    if ((a < 0.0) != (b < 0.0)) return prev_t + (t - prev_t) * a / (a - b);
    return std::nullopt;
  };
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    const double t = tr.time_at(i);
    if (auto hit = check(t, tr.samples[i])) return hit;
    prev_t = t;
    prev_x = tr.samples[i];
  }
  if (tr.completed() && tr.t_final != prev_t) return check(tr.t_final, tr.x_final);
  return std::nullopt;
}

}  // namespace qpbif
