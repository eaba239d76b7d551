#pragma once

// The coercive cubic field scale(t) * (-x^3 + c(t) x^2 + eps (b(t) x + a(t)))
// together with frozen-time root analysis, hypothesis classification and
// certified bracketing constants.

#include <array>
#include <cmath>
#include <algorithm>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpbif/coeffs.hpp"

namespace qpbif {

/// Anything the integrator can advance: freezing the time dependence at t
/// yields an object evaluating the right-hand side and its x-derivative.
template <class F>
concept ScalarField = requires(const F& f, double t, double eps, double x) {
  { f.at(t).value(eps, x) } -> std::convertible_to<double>;
  { f.at(t).slope(eps, x) } -> std::convertible_to<double>;
};

/// Coefficients of the cubic frozen at one instant.
struct FieldSample {
  double c = 0.0;
  double b = 0.0;
  double a = 0.0;
  double scale = 1.0;

  // x^2 (c - x) vanishes exactly at x == c, which keeps constant solutions exact.
  [[nodiscard]] double value(double eps, double x) const {
    return scale * (x * x * (c - x) + eps * (b * x + a));
  }
  [[nodiscard]] double slope(double eps, double x) const {
    return scale * (x * (2.0 * c - 3.0 * x) + eps * b);
  }
};

class CubicField {
 public:
  CubicField(Coefficient c, Coefficient b, Coefficient a, Coefficient scale = Coefficient(1.0))
      : c_(std::move(c)), b_(std::move(b)), a_(std::move(a)), scale_(std::move(scale)) {
    validate();
    compile();
  }

  /// Field whose a(t) is exactly -s * b(t).
  static CubicField proportional(Coefficient c, Coefficient b, double s,
                                 Coefficient scale = Coefficient(1.0)) {
    CubicField f(std::move(c), b, b.scaled(-s), std::move(scale));
    f.ratio_ = s;
    f.compile();
    return f;
  }

  [[nodiscard]] FieldSample at(double t) const {
    std::array<double, kMaxBasis> v{};
    for (std::size_t i = 0; i < basis_.size(); ++i) v[i] = basis_[i](t);
    FieldSample s;
    s.c = mono_[0].eval(v);
    s.b = mono_[1].eval(v);
    s.a = ratio_ ? -*ratio_ * s.b : mono_[2].eval(v);
    s.scale = mono_[3].eval(v);
    return s;
  }

  class GridSampler;

  /// Sequential sampler over the grid t0 + j * dt.
  [[nodiscard]] GridSampler sampler(double t0, double dt) const;

  [[nodiscard]] double eval(double eps, double t, double x) const { return at(t).value(eps, x); }
  [[nodiscard]] double dfdx(double eps, double t, double x) const { return at(t).slope(eps, x); }

  [[nodiscard]] const Coefficient& c() const { return c_; }
  [[nodiscard]] const Coefficient& b() const { return b_; }
  [[nodiscard]] const Coefficient& a() const { return a_; }
  [[nodiscard]] const Coefficient& scale() const { return scale_; }
  /// s when a = -s b structurally.
  [[nodiscard]] std::optional<double> ratio() const { return ratio_; }

  [[nodiscard]] CubicField rescaled(Coefficient scale) const {
    CubicField f = *this;
    f.scale_ = std::move(scale);
    f.validate();
    f.compile();
    return f;
  }

 private:
  static constexpr std::size_t kMaxBasis = 16;

  // factor * prod(v[num]) / prod(v[den]) over the shared basis values.
  struct Monomial {
    static constexpr std::size_t kMaxFactors = 6;
    double factor = 1.0;
    std::array<std::uint8_t, kMaxFactors> num{};
    std::array<std::uint8_t, kMaxFactors> den{};
    std::uint8_t n_num = 0;
    std::uint8_t n_den = 0;

    void push(bool numerator, std::size_t index) {
      auto& count = numerator ? n_num : n_den;
      if (count == kMaxFactors) throw std::length_error("too many factors in one coefficient");
      (numerator ? num : den)[count++] = static_cast<std::uint8_t>(index);
    }

    [[nodiscard]] double eval(const std::array<double, kMaxBasis>& v) const {
      double r = factor;
      for (std::uint8_t i = 0; i < n_num; ++i) r *= v[num[i]];
      if (n_den > 0) {
        double d = v[den[0]];
        for (std::uint8_t i = 1; i < n_den; ++i) d *= v[den[i]];
        r /= d;
      }
      return r;
    }
  };

  void validate() const {
    if (!(scale_.lower_bound() > 0.0)) {
      throw std::invalid_argument("field scale must be positively bounded below");
    }
  }

  // Each distinct non-constant TrigPoly is evaluated once per time instant.
  void compile() {
    basis_.clear();
    const auto index_of = [this](const TrigPoly& p) {
      for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (basis_[i] == p) return i;
      }
      if (basis_.size() == kMaxBasis) throw std::length_error("too many distinct coefficient factors");
      basis_.push_back(p);
      return basis_.size() - 1;
    };
    const auto build = [&](const Coefficient& co) {
      Monomial m;
      m.factor = co.factor();
      for (const auto& p : co.numerator()) {
        if (p.is_constant()) {
          m.factor *= p.constant();
        } else {
          m.push(true, index_of(p));
        }
      }
      for (const auto& p : co.denominator()) {
        if (p.is_constant()) {
          m.factor /= p.constant();
        } else {
          m.push(false, index_of(p));
        }
      }
      return m;
    };
    mono_ = {build(c_), build(b_), build(a_), build(scale_)};
  }

  friend class GridSampler;

  Coefficient c_;
  Coefficient b_;
  Coefficient a_;
  Coefficient scale_;
  std::optional<double> ratio_;
  std::vector<TrigPoly> basis_;
  std::array<Monomial, 4> mono_;
};

/// Advances every harmonic by a fixed rotation per grid step instead of
/// calling sin/cos at each stage; angles are recomputed exactly every
/// kResync steps so rounding drift stays at the 1e-15 level.
class CubicField::GridSampler {
 public:
  GridSampler(const CubicField& f, double t0, double dt) : field_(&f), t0_(t0), dt_(dt) {
    for (std::size_t i = 0; i < f.basis_.size(); ++i) {
      const TrigPoly& p = f.basis_[i];
      constant_[i] = p.constant();
      for (const auto& h : p.harmonics()) {
        if (n_ == kMaxRotors) throw std::length_error("too many harmonics in one field");
        owner_[n_] = static_cast<std::uint8_t>(i);
        const bool sine = h.kind == TrigKind::Sine;
        w_sin_[n_] = sine ? h.amplitude : 0.0;
        w_cos_[n_] = sine ? 0.0 : h.amplitude;
        freq_[n_] = h.frequency;
        phase_[n_] = h.phase;
        step_sin_[n_] = std::sin(h.frequency * dt);
        step_cos_[n_] = std::cos(h.frequency * dt);
        ++n_;
      }
    }
    resync();
  }

  [[nodiscard]] FieldSample current() const {
    std::array<double, kMaxBasis> v = constant_;
    for (std::size_t r = 0; r < n_; ++r) v[owner_[r]] += w_sin_[r] * s_[r] + w_cos_[r] * c_[r];
    const auto& m = field_->mono_;
    FieldSample s;
    s.c = m[0].eval(v);
    s.b = m[1].eval(v);
    s.a = field_->ratio_ ? -*field_->ratio_ * s.b : m[2].eval(v);
    s.scale = m[3].eval(v);
    return s;
  }

  void advance() {
    ++index_;
    if (index_ % kResync == 0) {
      resync();
      return;
    }
    for (std::size_t r = 0; r < n_; ++r) {
      const double s = s_[r] * step_cos_[r] + c_[r] * step_sin_[r];
      const double c = c_[r] * step_cos_[r] - s_[r] * step_sin_[r];
      s_[r] = s;
      c_[r] = c;
    }
  }

  [[nodiscard]] double time() const { return t0_ + static_cast<double>(index_) * dt_; }

 private:
  static constexpr std::int64_t kResync = 512;
  static constexpr std::size_t kMaxRotors = 32;

  void resync() {
    const double t = time();
    for (std::size_t r = 0; r < n_; ++r) {
      const double arg = freq_[r] * t + phase_[r];
      s_[r] = std::sin(arg);
      c_[r] = std::cos(arg);
    }
  }

  const CubicField* field_;
  double t0_;
  double dt_;
  std::int64_t index_ = 0;
  std::array<double, kMaxBasis> constant_{};
  // One rotor per harmonic, stored column-wise.
  std::size_t n_ = 0;
  std::array<std::uint8_t, kMaxRotors> owner_{};
  std::array<double, kMaxRotors> w_sin_{};
  std::array<double, kMaxRotors> w_cos_{};
  std::array<double, kMaxRotors> freq_{};
  std::array<double, kMaxRotors> phase_{};
  std::array<double, kMaxRotors> step_sin_{};
  std::array<double, kMaxRotors> step_cos_{};
  std::array<double, kMaxRotors> s_{};
  std::array<double, kMaxRotors> c_{};
};

inline CubicField::GridSampler CubicField::sampler(double t0, double dt) const {
  return GridSampler(*this, t0, dt);
}

static_assert(ScalarField<CubicField>);

// ---------------------------------------------------------------------------
// Frozen-time algebra

/// Discriminant in x of -x^3 + c x^2 + eps (b x + a). Scale-free.
inline double discriminant(double eps, double c, double b, double a) {
  return eps * (-4.0 * a * c * c * c + eps * b * b * c * c - 18.0 * eps * a * b * c -
                27.0 * eps * a * a + 4.0 * eps * eps * b * b * b);
}

inline double discriminant(const CubicField& f, double eps, double t) {
  const FieldSample s = f.at(t);
  return discriminant(eps, s.c, s.b, s.a);
}

/// |discriminant| below this is treated as a repeated root.
inline constexpr double kRepeatedRootBand = 1e-12;

/// Real roots (ascending, with multiplicity) of -x^3 + c x^2 + eps (b x + a).
inline std::vector<double> cubic_real_roots(double eps, double c, double b, double a) {
  // Monic form x^3 + A x^2 + B x + C.
  const double A = -c;
  const double B = -eps * b;
  const double C = -eps * a;
  const double shift = -A / 3.0;
  // Depressed cubic y^3 + p y + q with x = y + shift.
  const double p = B - A * A / 3.0;
  const double q = 2.0 * A * A * A / 27.0 - A * B / 3.0 + C;
  const double disc = discriminant(eps, c, b, a);

  std::vector<double> roots;
  if (std::abs(disc) < kRepeatedRootBand) {
    if (std::abs(p) < 1e-14) {
      roots = {shift, shift, shift};
    } else {
      const double dbl = -1.5 * q / p;
      const double single = 3.0 * q / p;
      roots = {dbl + shift, dbl + shift, single + shift};
    }
  } else if (disc > 0.0) {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      roots.push_back(m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0) + shift);
    }
  } else {
    const double r = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
    roots = {std::cbrt(-q / 2.0 + r) + std::cbrt(-q / 2.0 - r) + shift};
  }

  // One Newton polish per root.
  const auto g = [&](double x) { return ((x + A) * x + B) * x + C; };
  const auto dg = [&](double x) { return (3.0 * x + 2.0 * A) * x + B; };
  for (auto& x : roots) {
    const double d = dg(x);
    if (d != 0.0 && std::isfinite(d)) {
      const double nx = x - g(x) / d;
      if (std::abs(g(nx)) <= std::abs(g(x))) x = nx;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

inline std::vector<double> real_roots(const CubicField& f, double eps, double t) {
  const FieldSample s = f.at(t);
  return cubic_real_roots(eps, s.c, s.b, s.a);
}

// ---------------------------------------------------------------------------
// Hypothesis classification

enum class Regime { Case1Below, Case2Above, Case3Transcritical, Unclassified };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Case1Below: return "Case1_below";
    case Regime::Case2Above: return "Case2_above";
    case Regime::Case3Transcritical: return "Case3_transcritical";
    case Regime::Unclassified: return "Unclassified";
  }
  return "?";
}

struct RegimeClass {
  Regime kind = Regime::Unclassified;
  bool c_pos = false;
  bool a_neg = false;
  bool b_nonneg = false;
  bool b_pos = false;
  bool c_plus_lt_3c_minus = false;
  bool c_plus_lt_3s_minus = false;
  bool a_is_const_multiple_of_b = false;
  // Bounds of -a/b; NaN when b is not positively bounded below.
  double s_minus = std::numeric_limits<double>::quiet_NaN();
  double s_plus = std::numeric_limits<double>::quiet_NaN();
  Interval c_bounds;
  Interval b_bounds;
  Interval a_bounds;

  /// Branch location needs c > 0 and a < 0.
  [[nodiscard]] bool admits_branches() const { return c_pos && a_neg; }

  [[nodiscard]] std::string failed_hypotheses() const {
    std::string out;
    if (!c_pos) out += "c_pos ";
    if (!a_neg) out += "a_neg ";
    if (!out.empty()) out.pop_back();
    return out;
  }
};

inline RegimeClass classify_regime(const CubicField& f) {
  RegimeClass r;
  r.c_bounds = f.c().bounds();
  r.b_bounds = f.b().bounds();
  r.a_bounds = f.a().bounds();
  r.c_pos = r.c_bounds.lo > 0.0;
  r.a_neg = r.a_bounds.hi < 0.0;
  r.b_nonneg = r.b_bounds.lo >= 0.0;
  r.b_pos = r.b_bounds.lo > 0.0;
  r.c_plus_lt_3c_minus = r.c_bounds.hi < 3.0 * r.c_bounds.lo;
  r.a_is_const_multiple_of_b = f.ratio().has_value();

  if (r.a_is_const_multiple_of_b) {
    r.s_minus = r.s_plus = *f.ratio();
  } else if (r.b_pos) {
    const Interval s = (-r.a_bounds) / r.b_bounds;
    r.s_minus = s.lo;
    r.s_plus = s.hi;
  }
  r.c_plus_lt_3s_minus = std::isfinite(r.s_minus) && r.c_bounds.hi < 3.0 * r.s_minus;

  if (!r.c_pos || !r.a_neg || !r.b_pos || !std::isfinite(r.s_minus)) {
    r.kind = Regime::Unclassified;
  } else if (r.a_is_const_multiple_of_b && f.c().is_constant() && r.c_bounds.lo == *f.ratio() &&
             r.c_bounds.hi == *f.ratio()) {
    r.kind = Regime::Case3Transcritical;
  } else if (r.c_bounds.hi < r.s_minus) {
    r.kind = Regime::Case1Below;
  } else if (r.c_bounds.lo > r.s_plus) {
    r.kind = Regime::Case2Above;
  } else {
    r.kind = Regime::Unclassified;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bracketing constants

struct Bracket {
  double r1 = 0.0;  ///< field certified positive here for every t
  double r2 = 0.0;  ///< field certified negative here for every t
};

namespace detail {

/// Certified range over all t of x^2 (c - x) + eps (b x + a) at fixed x.
inline Interval unscaled_range(const CubicField& f, double eps, double x) {
  const Interval cubic = (x * x) * (f.c().bounds() - Interval{x, x});
  Interval lin;
  if (f.ratio()) {
    lin = (x - *f.ratio()) * f.b().bounds();
  } else {
    lin = x * f.b().bounds() + f.a().bounds();
  }
  return cubic + eps * lin;
}

}  // namespace detail

inline constexpr double kBracketSearchLimit = 1e6;

/// r1 < r2 with p(t, r1) > 0 > p(t, r2) for all t, so every bounded
/// solution lives in (r1, r2).
inline Bracket bracket_constants(const CubicField& f, double eps) {
  const Interval cb = f.c().bounds();
  double top = std::max(cb.hi, 1.0);
  if (f.ratio()) {
    top = std::max(top, *f.ratio());
  } else if (f.b().bounds().lo > 0.0) {
    top = std::max(top, ((-f.a().bounds()) / f.b().bounds()).hi);
  }
  Bracket br{std::min(0.0, cb.lo) - 1.0, top + 1.0};

  while (!(detail::unscaled_range(f, eps, br.r2).hi < 0.0)) {
    br.r2 *= 2.0;
    if (br.r2 > kBracketSearchLimit) throw std::logic_error("upper bracket search exceeded 1e6");
  }
  while (!(detail::unscaled_range(f, eps, br.r1).lo > 0.0)) {
    br.r1 *= 2.0;
    if (br.r1 < -kBracketSearchLimit) throw std::logic_error("lower bracket search exceeded 1e6");
  }
  return br;
}

/// (c_- + sqrt(c_-^2 + 3 eps b_-)) / 3: above the local maximum of every
/// frozen cubic, hence a strict lower solution once eps is large.
inline double x_plus(const CubicField& f, double eps) {
  const double cm = f.c().lower_bound();
  const double bm = f.b().lower_bound();
  if (eps < 0.0 || bm < 0.0) throw std::domain_error("x_plus needs eps >= 0 and b >= 0");
  return (cm + std::sqrt(cm * cm + 3.0 * eps * bm)) / 3.0;
}

}  // namespace qpbif
