#pragma once

// Truncated Lyapunov exponents (1/t) * int_0^t df/dx along a branch, and
// their min/max over a tail window [tau, T].

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qpbif/branches.hpp"

namespace qpbif {

class CoverageError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Running integral of df/dx along the branch over [origin, origin + T] on
/// the report grid, regenerated at full step resolution from the branch seed.
template <ScalarField F>
std::vector<double> exponent_integral(const F& f, double eps, const Branch& br, double origin, double T,
                                      double x_max = kDefaultEscape) {
  if (!(T > 0.0)) throw CoverageError("exponent window must have T > 0");
  const std::int64_t n = detail::grid_steps(T, br.step);
  if (br.exact) {
    return detail::constant_integral(f, eps, br.samples.front(), origin, static_cast<std::size_t>(n) + 1, br.step,
                                     br.h);
  }
  // Reuse what the locating run already recorded when the window fits.
  if (origin == br.t_start && n + 1 <= static_cast<std::int64_t>(br.exp_integral.size())) {
    return {br.exp_integral.begin(), br.exp_integral.begin() + n + 1};
  }
  detail::WindowRecord rec;
  if (br.direction() == Direction::Forward) {
    if (origin < br.seed_t) throw CoverageError("exponent window starts before the branch seed");
    rec = detail::run_window(f, eps, br.seed_t, br.seed_x, origin + T, origin, origin + T, br.step, br.h, x_max);
  } else {
    if (origin + T > br.seed_t) throw CoverageError("exponent window ends after the backward branch seed");
    rec = detail::run_window(f, eps, br.seed_t, br.seed_x, origin, origin, origin + T, br.step, br.h, x_max);
  }
  if (rec.escape) throw IntegrationError("branch regeneration escaped");
  return rec.integral;
}

/// (1/t) * int_origin^{origin+t} df/dx along the branch; origin defaults to
/// the left end of the branch window.
template <ScalarField F>
double truncated_exponent(const F& f, double eps, const Branch& br, double t) {
  if (!(t > 0.0)) throw CoverageError("truncated exponent needs t > 0");
  const std::vector<double> I = exponent_integral(f, eps, br, br.t_start, t);
  return I.back() / t;
}

template <ScalarField F>
LyapBounds lyap_bounds(const F& f, double eps, const Branch& br, double T, double tau,
                       std::optional<double> origin = std::nullopt, double x_max = kDefaultEscape) {
  if (!(tau > 0.0 && tau < T)) throw CoverageError("need 0 < tau < T");
  const double t0 = origin.value_or(br.t_start);
  const std::vector<double> I = exponent_integral(f, eps, br, t0, T, x_max);
  LyapBounds lb;
  lb.T = T;
  lb.tau = tau;
  lb.origin = t0;
  lb.gamma_l = std::numeric_limits<double>::infinity();
  lb.gamma_u = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < I.size(); ++j) {
    const double t = static_cast<double>(j) * br.step;
    if (t < tau - 1e-9) continue;
    const double g = I[j] / t;
    lb.gamma_l = std::min(lb.gamma_l, g);
    lb.gamma_u = std::max(lb.gamma_u, g);
  }
  lb.sign = LyapBounds::sign_of(lb.gamma_l, lb.gamma_u);
  return lb;
}

/// Stability from the exponent sign: forward-located branches with negative
/// exponents are attractive, backward-located ones with positive exponents
/// are repulsive, anything else is undetermined.
inline Stability stability_from(BranchSource source, LyapSign sign) {
  if (source == BranchSource::BackwardMid) {
    return sign == LyapSign::Positive ? Stability::Repulsive : Stability::Undetermined;
  }
  return sign == LyapSign::Negative ? Stability::Attractive : Stability::Undetermined;
}

/// Attach exponent bounds over the branch window (T = window length,
/// tau = T / 10) to every branch and settle its stability.
template <ScalarField F>
void classify_stability(const F& f, BranchSet& set, double tau_fraction = 0.1) {
  for (auto* slot : {&set.lower, &set.middle, &set.upper}) {
    if (!*slot) continue;
    Branch& b = **slot;
    const double T = b.t_end() - b.t_start;
    b.lyap = lyap_bounds(f, set.epsilon, b, T, tau_fraction * T);
    b.stability = stability_from(b.source, b.lyap->sign);
  }
}

}  // namespace qpbif
