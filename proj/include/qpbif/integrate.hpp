#pragma once

// Fixed-step classical RK4, forward or backward in time, with an escape
// guard for finite-time blow-up.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "qpbif/field.hpp"

namespace qpbif {

enum class Direction { Forward, Backward };

inline constexpr double kDefaultStep = 1.0 / 1024.0;
inline constexpr double kDefaultEscape = 1e6;
inline constexpr std::int64_t kDefaultDecimation = 1024;

struct IntegrationOptions {
  double h = kDefaultStep;
  double x_max = kDefaultEscape;
  /// Keep every k-th step in Trajectory::samples.
  std::int64_t decimation = kDefaultDecimation;
};

struct Escape {
  double time = 0.0;
  double last_x = 0.0;  ///< last state that passed the guard
};

struct Trajectory {
  double t0 = 0.0;
  double h = kDefaultStep;
  Direction direction = Direction::Forward;
  std::int64_t decimation = 1;
  /// x at t0 + i * h * decimation * (+1 | -1).
  std::vector<double> samples;
  double t_final = 0.0;
  double x_final = 0.0;
  std::optional<Escape> escape;

  [[nodiscard]] bool completed() const { return !escape.has_value(); }
  [[nodiscard]] double sample_step() const {
    return (direction == Direction::Forward ? 1.0 : -1.0) * h * static_cast<double>(decimation);
  }
  [[nodiscard]] double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * sample_step(); }
};

class IntegrationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Outcome of a streamed integration.
struct StreamEnd {
  double t = 0.0;
  double x = 0.0;
  std::int64_t steps = 0;
  std::optional<Escape> escape;
};

/// Number of whole h-steps covering `length`, and the leftover fraction.
inline std::pair<std::int64_t, double> step_count(double length, double h) {
  const double ratio = length / h;
  auto n = static_cast<std::int64_t>(std::floor(ratio));
  if (ratio - static_cast<double>(n) > 1.0 - 1e-9) ++n;  // absorb rounding just below an integer
  double rest = length - static_cast<double>(n) * h;
  if (std::abs(rest) < 1e-9 * h) rest = 0.0;
  return {n, std::max(rest, 0.0)};
}

/// Advance x from t0 to t_end with RK4. The visitor sees (step, t, x,
/// frozen field at t) for the initial point and after every whole step; the
/// closing partial step, if any, is not visited.
template <ScalarField F, class Visitor>
StreamEnd rk4_stream(const F& f, double eps, double t0, double x0, double t_end, double h, double x_max,
                     Visitor&& visit) {
  if (!(h > 0.0) || !std::isfinite(h)) throw IntegrationError("step size must be positive and finite");
  if (!std::isfinite(t0) || !std::isfinite(x0) || !std::isfinite(t_end) || !std::isfinite(eps)) {
    throw IntegrationError("non-finite integration input");
  }
  if (!(std::abs(x0) < x_max)) throw IntegrationError("initial state outside the escape guard");

  const double sign = t_end >= t0 ? 1.0 : -1.0;
  const double dt = sign * h;
  const auto [n, rest] = step_count(std::abs(t_end - t0), h);

  auto s0 = f.at(t0);
  double x = x0;
  visit(std::int64_t{0}, t0, x, s0);

  const auto step = [&](const auto& a, const auto& mid, const auto& b, double xs, double d) {
    const double k1 = a.value(eps, xs);
    const double k2 = mid.value(eps, xs + 0.5 * d * k1);
    const double k3 = mid.value(eps, xs + 0.5 * d * k2);
    const double k4 = b.value(eps, xs + d * k3);
    return xs + d / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
  };

  // Fields that can stream their coefficients over the half-step grid do so.
  constexpr bool kGrid = requires { f.sampler(t0, dt); };
  auto grid = [&] {
    if constexpr (kGrid) {
      auto g = f.sampler(t0, 0.5 * dt);
      return g;
    } else {
      return 0;
    }
  }();

  StreamEnd end;
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    const double t1 = t0 + static_cast<double>(i + 1) * dt;
    decltype(s0) sm;
    decltype(s0) s1;
    if constexpr (kGrid) {
      grid.advance();
      sm = grid.current();
      grid.advance();
      s1 = grid.current();
    } else {
      sm = f.at(t + 0.5 * dt);
      s1 = f.at(t1);
    }
    const double nx = step(s0, sm, s1, x, dt);
    if (!std::isfinite(nx) || std::abs(nx) >= x_max) {
      end.escape = Escape{t1, x};
      end.t = t;
      end.x = x;
      end.steps = i;
      return end;
    }
    x = nx;
    s0 = s1;
    visit(i + 1, t1, x, s0);
  }
  double t = t0 + static_cast<double>(n) * dt;
  if (rest > 0.0) {
    const double d = sign * rest;
    const double nx = step(s0, f.at(t + 0.5 * d), f.at(t_end), x, d);
    if (!std::isfinite(nx) || std::abs(nx) >= x_max) {
      end.escape = Escape{t_end, x};
      end.t = t;
      end.x = x;
      end.steps = n;
      return end;
    }
    x = nx;
    t = t_end;
  }
  end.t = t;
  end.x = x;
  end.steps = n;
  return end;
}

/// A trajectory entering a shared step grid at step `join` with state x.
struct LaneSeed {
  std::int64_t join = 0;
  double x = 0.0;
};

/// Advance several trajectories over one grid t0 + i * dt (dt = +-h) for
/// `n` whole steps, sharing the frozen field at every stage. After every
/// step (and at step 0) the visitor sees (step, t, states, live, frozen
/// field at t); `live[k]` is set once lane k has joined and while it has not
/// escaped. A visitor returning bool ends the whole run by returning false.
template <std::size_t N, ScalarField F, class Visitor>
std::array<StreamEnd, N> rk4_lanes(const F& f, double eps, double t0, double dt, std::int64_t n, double x_max,
                                   const std::array<LaneSeed, N>& seeds, Visitor&& visit) {
  if (!(std::abs(dt) > 0.0) || !std::isfinite(dt)) throw IntegrationError("step size must be non-zero and finite");
  if (!std::isfinite(t0) || !std::isfinite(eps) || n < 0) throw IntegrationError("bad lane integration input");
  std::array<double, N> x{};
  std::array<bool, N> live{};
  std::array<StreamEnd, N> end{};
  for (std::size_t k = 0; k < N; ++k) {
    if (!std::isfinite(seeds[k].x) || !(std::abs(seeds[k].x) < x_max)) {
      throw IntegrationError("initial state outside the escape guard");
    }
    if (seeds[k].join < 0 || seeds[k].join > n) throw IntegrationError("lane joins outside the grid");
  }

  constexpr bool kGrid = requires { f.sampler(t0, dt); };
  auto grid = [&] {
    if constexpr (kGrid) {
      return f.sampler(t0, 0.5 * dt);
    } else {
      return 0;
    }
  }();
  auto s0 = f.at(t0);
  const auto join = [&](std::int64_t i, double t) {
    for (std::size_t k = 0; k < N; ++k) {
      if (seeds[k].join == i) {
        live[k] = true;
        x[k] = seeds[k].x;
        end[k] = StreamEnd{t, x[k], i, std::nullopt};
      }
    }
  };
  const auto call = [&](std::int64_t i, double t) {
    if constexpr (std::is_same_v<decltype(visit(i, t, std::as_const(x), std::as_const(live), s0)), bool>) {
      return visit(i, t, std::as_const(x), std::as_const(live), s0);
    } else {
      visit(i, t, std::as_const(x), std::as_const(live), s0);
      return true;
    }
  };
  const auto finish = [&](std::int64_t i, double t) {
    for (std::size_t k = 0; k < N; ++k) {
      if (!live[k]) continue;
      end[k].t = t;
      end[k].x = x[k];
      end[k].steps = i - seeds[k].join;
    }
    return end;
  };
  join(0, t0);
  if (!call(0, t0)) return finish(0, t0);

  for (std::int64_t i = 0; i < n; ++i) {
    const double t1 = t0 + static_cast<double>(i + 1) * dt;
    decltype(s0) sm;
    decltype(s0) s1;
    if constexpr (kGrid) {
      grid.advance();
      sm = grid.current();
      grid.advance();
      s1 = grid.current();
    } else {
      sm = f.at(t0 + (static_cast<double>(i) + 0.5) * dt);
      s1 = f.at(t1);
    }
    for (std::size_t k = 0; k < N; ++k) {
      if (!live[k]) continue;
      const double xs = x[k];
      const double k1 = s0.value(eps, xs);
      const double k2 = sm.value(eps, xs + 0.5 * dt * k1);
      const double k3 = sm.value(eps, xs + 0.5 * dt * k2);
      const double k4 = s1.value(eps, xs + dt * k3);
      const double nx = xs + dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
      if (!std::isfinite(nx) || std::abs(nx) >= x_max) {
        end[k] = StreamEnd{t1 - dt, xs, i - seeds[k].join, Escape{t1, xs}};
        live[k] = false;
        continue;
      }
      x[k] = nx;
    }
    s0 = s1;
    join(i + 1, t1);
    if (!call(i + 1, t1)) return finish(i + 1, t1);
  }
  return finish(n, t0 + static_cast<double>(n) * dt);
}

/// Integrate and keep a decimated sample record.
template <ScalarField F>
Trajectory rk4_integrate(const F& f, double eps, double t0, double x0, double t_end,
                         const IntegrationOptions& opt = {}) {
  if (opt.decimation < 1) throw IntegrationError("decimation must be >= 1");
  Trajectory tr;
  tr.t0 = t0;
  tr.h = opt.h;
  tr.direction = t_end >= t0 ? Direction::Forward : Direction::Backward;
  tr.decimation = opt.decimation;
  tr.samples.reserve(static_cast<std::size_t>(std::abs(t_end - t0) / (opt.h * opt.decimation)) + 2);
  const StreamEnd end = rk4_stream(f, eps, t0, x0, t_end, opt.h, opt.x_max,
                                   [&](std::int64_t i, double, double x, const auto&) {
                                     if (i % opt.decimation == 0) tr.samples.push_back(x);
                                   });
  tr.t_final = end.t;
  tr.x_final = end.x;
  tr.escape = end.escape;
  return tr;
}

template <ScalarField F>
Trajectory rk4_integrate(const F& f, double eps, double t0, double x0, double t_end, double h) {
  IntegrationOptions opt;
  opt.h = h;
  opt.decimation = 1;
  return rk4_integrate(f, eps, t0, x0, t_end, opt);
}

/// Richardson estimate of the convergence order from runs with steps h, h/2
/// and h/4, compared in the max norm on the coarse grid. End states alone
/// are unreliable along attracting solutions, where the leading error term
/// at a single time can nearly cancel.
template <ScalarField F>
double order_check(const F& f, double eps, double t0, double x0, double t_end, double h = 0.125,
                   double x_max = kDefaultEscape) {
  if (t_end == t0) throw IntegrationError("order check needs a non-empty window");
  std::vector<double> runs[3];
  double end[3];
  for (int k = 0; k < 3; ++k) {
    const std::int64_t every = std::int64_t{1} << k;
    const StreamEnd r = rk4_stream(f, eps, t0, x0, t_end, h / static_cast<double>(every), x_max,
                                   [&](std::int64_t i, double, double x, const auto&) {
                                     if (i % every == 0) runs[k].push_back(x);
                                   });
    if (r.escape) throw IntegrationError("escape during order check");
    end[k] = r.x;
  }
  double coarse = std::abs(end[0] - end[1]);
  double fine = std::abs(end[1] - end[2]);
  const std::size_t n = std::min({runs[0].size(), runs[1].size(), runs[2].size()});
  for (std::size_t i = 0; i < n; ++i) {
    coarse = std::max(coarse, std::abs(runs[0][i] - runs[1][i]));
    fine = std::max(fine, std::abs(runs[1][i] - runs[2][i]));
  }
  if (fine == 0.0 || coarse == 0.0) throw IntegrationError("order check differences vanished");
  return std::log2(coarse / fine);
}

}  // namespace qpbif
