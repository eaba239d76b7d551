#pragma once

// Quasiperiodic scalar coefficients: finite trigonometric sums and
// products/quotients of them, with exact means and certified bounds.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qpbif {

/// Closed interval [lo, hi] with the handful of operations bracketing needs.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double v) const { return lo <= v && v <= hi; }
  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] bool positive() const { return lo > 0.0; }
  [[nodiscard]] bool negative() const { return hi < 0.0; }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a) { return {-a.hi, -a.lo}; }
inline Interval operator-(Interval a, Interval b) { return a + (-b); }

inline Interval operator*(Interval a, Interval b) {
  const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

inline Interval operator*(double s, Interval a) {
  return s >= 0.0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}

/// Division by an interval that excludes zero.
inline Interval operator/(Interval a, Interval b) {
  if (b.lo <= 0.0 && b.hi >= 0.0) {
    throw std::domain_error("interval division by an interval containing zero");
  }
  return a * Interval{1.0 / b.hi, 1.0 / b.lo};
}

enum class TrigKind { Sine, Cosine };

struct Harmonic {
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;
  TrigKind kind = TrigKind::Cosine;

  [[nodiscard]] double operator()(double t) const {
    const double arg = frequency * t + phase;
    return amplitude * (kind == TrigKind::Sine ? std::sin(arg) : std::cos(arg));
  }

  friend bool operator==(const Harmonic&, const Harmonic&) = default;
};

/// constant + sum of amplitude * trig(frequency * t + phase).
///
/// Frequencies are strictly positive, so the time mean is exactly the
/// constant term. Bounds are the conservative constant -/+ sum|amplitude|.
class TrigPoly {
 public:
  TrigPoly() = default;
  TrigPoly(double constant) : constant_(constant) {}  // NOLINT: implicit by intent
  TrigPoly(double constant, std::vector<Harmonic> harmonics)
      : constant_(constant), harmonics_(std::move(harmonics)) {
    for (const auto& h : harmonics_) {
      if (!(h.frequency > 0.0) || !std::isfinite(h.frequency) || !std::isfinite(h.amplitude) ||
          !std::isfinite(h.phase)) {
        throw std::invalid_argument("harmonic needs finite amplitude/phase and frequency > 0");
      }
    }
    if (!std::isfinite(constant_)) throw std::invalid_argument("non-finite constant term");
  }

  [[nodiscard]] double operator()(double t) const {
    double v = constant_;
    for (const auto& h : harmonics_) v += h(t);
    return v;
  }
  [[nodiscard]] double eval(double t) const { return (*this)(t); }

  [[nodiscard]] double mean() const { return constant_; }
  [[nodiscard]] double constant() const { return constant_; }
  [[nodiscard]] const std::vector<Harmonic>& harmonics() const { return harmonics_; }

  [[nodiscard]] double amplitude_sum() const {
    double s = 0.0;
    for (const auto& h : harmonics_) s += std::abs(h.amplitude);
    return s;
  }
  [[nodiscard]] double lower_bound() const { return constant_ - amplitude_sum(); }
  [[nodiscard]] double upper_bound() const { return constant_ + amplitude_sum(); }
  [[nodiscard]] Interval bounds() const { return {lower_bound(), upper_bound()}; }

  /// True when no harmonic has a non-zero amplitude.
  [[nodiscard]] bool is_constant() const {
    return std::all_of(harmonics_.begin(), harmonics_.end(),
                       [](const Harmonic& h) { return h.amplitude == 0.0; });
  }

  /// Sampled range over [t0, t0 + span] with the given step. For reporting
  /// only: never a guarantee.
  [[nodiscard]] Interval grid_bounds(double span = 0.0, double step = 1e-3, double t0 = 0.0) const {
    if (span <= 0.0) span = quasi_period_estimate();
    const auto n = static_cast<long long>(std::ceil(span / step));
    Interval r{eval(t0), eval(t0)};
    for (long long i = 1; i <= n; ++i) {
      const double v = eval(t0 + static_cast<double>(i) * step);
      r.lo = std::min(r.lo, v);
      r.hi = std::max(r.hi, v);
    }
    return r;
  }

  /// Sum of the harmonic periods: long enough for every harmonic to sweep
  /// a full cycle and for their phases to mix.
  [[nodiscard]] double quasi_period_estimate() const {
    double span = 0.0;
    for (const auto& h : harmonics_) span += 2.0 * std::numbers::pi / h.frequency;
    return span > 0.0 ? 10.0 * span : 1.0;
  }

  [[nodiscard]] TrigPoly scaled(double factor) const {
    TrigPoly r = *this;
    r.constant_ *= factor;
    for (auto& h : r.harmonics_) h.amplitude *= factor;
    return r;
  }

  friend bool operator==(const TrigPoly&, const TrigPoly&) = default;

 private:
  double constant_ = 0.0;
  std::vector<Harmonic> harmonics_;
};

/// factor * prod(numerator) / prod(denominator) over TrigPoly factors.
///
/// Covers the coefficient shapes produced by rewriting the population model
/// as a cubic field (k*b/r, r/k). Denominators must be bounded away from
/// zero; bounds come from interval arithmetic over the factor bounds.
class Coefficient {
 public:
  Coefficient() = default;
  Coefficient(double constant) : numerator_{TrigPoly(constant)} {}  // NOLINT
  Coefficient(TrigPoly p) : numerator_{std::move(p)} {}             // NOLINT
  Coefficient(double factor, std::vector<TrigPoly> numerator, std::vector<TrigPoly> denominator)
      : factor_(factor), numerator_(std::move(numerator)), denominator_(std::move(denominator)) {
    for (const auto& d : denominator_) {
      const Interval b = d.bounds();
      if (b.lo <= 0.0 && b.hi >= 0.0) {
        throw std::invalid_argument("coefficient denominator is not bounded away from zero");
      }
    }
  }

  [[nodiscard]] double operator()(double t) const {
    double v = factor_;
    for (const auto& p : numerator_) v *= p(t);
    for (const auto& p : denominator_) v /= p(t);
    return v;
  }
  [[nodiscard]] double eval(double t) const { return (*this)(t); }

  [[nodiscard]] Interval bounds() const {
    Interval r{factor_, factor_};
    for (const auto& p : numerator_) r = r * p.bounds();
    for (const auto& p : denominator_) r = r / p.bounds();
    return r;
  }
  [[nodiscard]] double lower_bound() const { return bounds().lo; }
  [[nodiscard]] double upper_bound() const { return bounds().hi; }

  /// A single TrigPoly factor (times a constant), whose mean is exact.
  [[nodiscard]] bool is_trig_poly() const {
    return denominator_.empty() && non_constant_factors(numerator_) <= 1;
  }

  [[nodiscard]] bool is_constant() const {
    return non_constant_factors(numerator_) == 0 && non_constant_factors(denominator_) == 0;
  }

  /// Exact time mean for trig-polynomial coefficients; otherwise the time
  /// average over [0, horizon] by composite Simpson with the given step.
  [[nodiscard]] double mean(double horizon = 1e5, double step = 1.0 / 64.0) const {
    if (is_trig_poly()) {
      double v = factor_;
      for (const auto& p : numerator_) v *= p.mean();
      return v;
    }
    auto n = static_cast<long long>(std::ceil(horizon / step));
    if (n % 2 != 0) ++n;
    const double hs = horizon / static_cast<double>(n);
    double acc = eval(0.0) + eval(horizon);
    for (long long i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * eval(static_cast<double>(i) * hs);
    return acc * hs / 3.0 / horizon;
  }

  [[nodiscard]] Coefficient scaled(double s) const {
    Coefficient r = *this;
    r.factor_ *= s;
    return r;
  }

  [[nodiscard]] double factor() const { return factor_; }
  [[nodiscard]] const std::vector<TrigPoly>& numerator() const { return numerator_; }
  [[nodiscard]] const std::vector<TrigPoly>& denominator() const { return denominator_; }

  /// Collapse to a TrigPoly when possible.
  [[nodiscard]] TrigPoly as_trig_poly() const {
    if (!is_trig_poly()) throw std::logic_error("coefficient is not a trigonometric polynomial");
    double k = factor_;
    const TrigPoly* var = nullptr;
    for (const auto& p : numerator_) {
      if (p.is_constant()) {
        k *= p.constant();
      } else {
        var = &p;
      }
    }
    return var ? var->scaled(k) : TrigPoly(k);
  }

  /// Frequencies of every non-constant factor, for reports.
  [[nodiscard]] std::vector<double> frequencies() const {
    std::vector<double> f;
    for (const auto* list : {&numerator_, &denominator_}) {
      for (const auto& p : *list) {
        for (const auto& h : p.harmonics()) f.push_back(h.frequency);
      }
    }
    return f;
  }

  friend bool operator==(const Coefficient&, const Coefficient&) = default;

 private:
  static std::size_t non_constant_factors(const std::vector<TrigPoly>& v) {
    return static_cast<std::size_t>(
        std::count_if(v.begin(), v.end(), [](const TrigPoly& p) { return !p.is_constant(); }));
  }

  double factor_ = 1.0;
  std::vector<TrigPoly> numerator_{TrigPoly(0.0)};
  std::vector<TrigPoly> denominator_;
};

}  // namespace qpbif
