#pragma once

// Experiment configuration (JSON), CSV writers and a small SVG diagram
// emitter.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <locale>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpbif/bifurcate.hpp"
#include "qpbif/popmodel.hpp"

namespace qpbif {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Cubic field given coefficient by coefficient; `a` is replaced by
/// -ratio * b when `ratio` is set.
struct FieldConfig {
  Coefficient c{1.0};
  Coefficient b{0.0};
  std::optional<Coefficient> a;
  std::optional<double> ratio;
  Coefficient scale{1.0};

  [[nodiscard]] CubicField build() const {
    if (ratio) return CubicField::proportional(c, b, *ratio, scale);
    return CubicField(c, b, *a, scale);
  }
  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

struct PopulationConfig {
  TrigPoly r{1.0};
  TrigPoly k{1.0};
  TrigPoly b{1.0};
  double s = 1.0;
  double horizon = 2e4;

  [[nodiscard]] PopScenario scenario(double eps, double x0) const {
    PopScenario sc;
    sc.r = r;
    sc.k = k;
    sc.b = b;
    sc.s = s;
    sc.eps = eps;
    sc.x0 = x0;
    sc.horizon = horizon;
    return sc;
  }
  friend bool operator==(const PopulationConfig&, const PopulationConfig&) = default;
};

struct Numerics {
  double h = kDefaultStep;
  double t_run = 1e4;
  double t_eval = 1e3;
  double x_max = kDefaultEscape;
  double delta_sep = 1e-6;
  double delta_match = 1e-8;
  double target_width = 1e-12;
  double report_step = 1.0;
  double delta_track = 1e-3;

  [[nodiscard]] BranchOptions branch() const {
    BranchOptions o;
    o.h = h;
    o.t_run = t_run;
    o.t_eval = t_eval;
    o.x_max = x_max;
    o.delta_sep = delta_sep;
    o.delta_match = delta_match;
    o.report_step = report_step;
    return o;
  }
  [[nodiscard]] PopOptions population() const {
    PopOptions p;
    p.branch = branch();
    p.delta_track = delta_track;
    return p;
  }
  friend bool operator==(const Numerics&, const Numerics&) = default;
};

/// Per-subcommand parameters; each is optional in the file.
struct TaskParams {
  std::optional<double> eps;
  std::optional<double> eps_from;
  std::optional<double> eps_to;
  std::optional<int> steps;
  std::optional<double> eps_lo;
  std::optional<double> eps_hi;
  std::vector<double> x0;
  std::optional<std::string> branch;
  std::vector<std::pair<double, double>> windows;  ///< (T, tau)
  std::optional<double> origin;
  friend bool operator==(const TaskParams&, const TaskParams&) = default;
};

struct ExperimentConfig {
  std::optional<FieldConfig> field;
  std::optional<PopulationConfig> population;
  Numerics numerics;
  TaskParams task;

  void validate() const {
    if (field.has_value() == population.has_value()) {
      throw ConfigError("exactly one of 'field' and 'population' must be given");
    }
    if (field && field->a.has_value() == field->ratio.has_value()) {
      throw ConfigError("field needs exactly one of 'a' and 'ratio'");
    }
    const Numerics& n = numerics;
    for (const auto& [name, v] : {std::pair{"h", n.h}, {"t_run", n.t_run}, {"t_eval", n.t_eval}, {"x_max", n.x_max},
                                  {"delta_sep", n.delta_sep}, {"delta_match", n.delta_match},
                                  {"target_width", n.target_width}, {"report_step", n.report_step},
                                  {"delta_track", n.delta_track}}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("numerics.") + name + " must be positive");
    }
    if (!(n.t_run > n.t_eval)) throw ConfigError("numerics.t_run must exceed numerics.t_eval");
    if (task.steps && *task.steps < 1) throw ConfigError("task.steps must be at least 1");
    for (const auto& [T, tau] : task.windows) {
      if (!(tau > 0.0 && T > tau)) throw ConfigError("each window needs T > tau > 0");
    }
    if (population && !(population->horizon > 0.0)) throw ConfigError("population.horizon must be positive");
  }

  /// The field in cubic form, whichever way it was given.
  [[nodiscard]] CubicField cubic() const {
    try {
      if (field) return field->build();
      return population->scenario(0.0, 1.0).to_field();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// ---- JSON ----------------------------------------------------------------

namespace detail {

inline double number(const json& j, const char* what) {
  if (!j.is_number()) throw ConfigError(std::string(what) + " must be a number");
  return j.get<double>();
}

inline TrigKind kind_from(const std::string& s) {
  if (s == "sin") return TrigKind::Sine;
  if (s == "cos") return TrigKind::Cosine;
  throw ConfigError("harmonic kind must be 'sin' or 'cos', got '" + s + "'");
}

}  // namespace detail

inline json to_json(const TrigPoly& p) {
  if (p.harmonics().empty()) return p.constant();
  json hs = json::array();
  for (const auto& h : p.harmonics()) {
    hs.push_back({{"amplitude", h.amplitude},
                  {"frequency", h.frequency},
                  {"phase", h.phase},
                  {"kind", h.kind == TrigKind::Sine ? "sin" : "cos"}});
  }
  return {{"constant", p.constant()}, {"harmonics", hs}};
}

/// A number, or {"constant": c, "harmonics": [{amplitude, frequency, phase, kind}]}.
inline TrigPoly trig_poly_from(const json& j) {
  if (j.is_number()) return TrigPoly(j.get<double>());
  if (!j.is_object()) throw ConfigError("trigonometric polynomial must be a number or an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "constant" && key != "harmonics") throw ConfigError("unknown key '" + key + "' in polynomial");
  }
  const double c = j.contains("constant") ? detail::number(j.at("constant"), "constant") : 0.0;
  std::vector<Harmonic> hs;
  if (j.contains("harmonics")) {
    if (!j.at("harmonics").is_array()) throw ConfigError("harmonics must be an array");
    for (const auto& e : j.at("harmonics")) {
      Harmonic h;
      h.amplitude = detail::number(e.at("amplitude"), "amplitude");
      h.frequency = detail::number(e.at("frequency"), "frequency");
      h.phase = e.contains("phase") ? detail::number(e.at("phase"), "phase") : 0.0;
      h.kind = detail::kind_from(e.value("kind", std::string("cos")));
      hs.push_back(h);
    }
  }
  try {
    return TrigPoly(c, std::move(hs));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline json to_json(const Coefficient& c) {
  if (c.denominator().empty() && c.numerator().size() == 1 && c.factor() == 1.0) return to_json(c.numerator()[0]);
  json num = json::array();
  json den = json::array();
  for (const auto& p : c.numerator()) num.push_back(to_json(p));
  for (const auto& p : c.denominator()) den.push_back(to_json(p));
  return {{"factor", c.factor()}, {"numerator", num}, {"denominator", den}};
}

/// A polynomial, or {"factor": f, "numerator": [...], "denominator": [...]}.
inline Coefficient coefficient_from(const json& j) {
  if (!j.is_object() || !(j.contains("numerator") || j.contains("denominator") || j.contains("factor"))) {
    return Coefficient(trig_poly_from(j));
  }
  const double factor = j.contains("factor") ? detail::number(j.at("factor"), "factor") : 1.0;
  std::vector<TrigPoly> num;
  std::vector<TrigPoly> den;
  if (j.contains("numerator")) {
    for (const auto& e : j.at("numerator")) num.push_back(trig_poly_from(e));
  }
  if (j.contains("denominator")) {
    for (const auto& e : j.at("denominator")) den.push_back(trig_poly_from(e));
  }
  if (num.empty()) num.emplace_back(1.0);
  try {
    return Coefficient(factor, std::move(num), std::move(den));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline json to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.field) {
    json f{{"c", to_json(cfg.field->c)}, {"b", to_json(cfg.field->b)}, {"scale", to_json(cfg.field->scale)}};
    if (cfg.field->a) f["a"] = to_json(*cfg.field->a);
    if (cfg.field->ratio) f["ratio"] = *cfg.field->ratio;
    j["field"] = f;
  }
  if (cfg.population) {
    const auto& p = *cfg.population;
    j["population"] = {
        {"r", to_json(p.r)}, {"k", to_json(p.k)}, {"b", to_json(p.b)}, {"s", p.s}, {"horizon", p.horizon}};
  }
  const Numerics& n = cfg.numerics;
  j["numerics"] = {{"h", n.h},
                   {"t_run", n.t_run},
                   {"t_eval", n.t_eval},
                   {"x_max", n.x_max},
                   {"delta_sep", n.delta_sep},
                   {"delta_match", n.delta_match},
                   {"target_width", n.target_width},
                   {"report_step", n.report_step},
                   {"delta_track", n.delta_track}};
  json t = json::object();
  const TaskParams& tp = cfg.task;
  if (tp.eps) t["eps"] = *tp.eps;
  if (tp.eps_from) t["eps_from"] = *tp.eps_from;
  if (tp.eps_to) t["eps_to"] = *tp.eps_to;
  if (tp.steps) t["steps"] = *tp.steps;
  if (tp.eps_lo) t["eps_lo"] = *tp.eps_lo;
  if (tp.eps_hi) t["eps_hi"] = *tp.eps_hi;
  if (!tp.x0.empty()) t["x0"] = tp.x0;
  if (tp.branch) t["branch"] = *tp.branch;
  if (!tp.windows.empty()) {
    json w = json::array();
    for (const auto& [T, tau] : tp.windows) w.push_back({T, tau});
    t["windows"] = w;
  }
  if (tp.origin) t["origin"] = *tp.origin;
  j["task"] = t;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "field" && key != "population" && key != "numerics" && key != "task") {
      throw ConfigError("unknown top-level key '" + key + "'");
    }
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("field")) {
      const json& f = j.at("field");
      FieldConfig fc;
      fc.c = coefficient_from(f.at("c"));
      fc.b = coefficient_from(f.at("b"));
      if (f.contains("a")) fc.a = coefficient_from(f.at("a"));
      if (f.contains("ratio")) fc.ratio = detail::number(f.at("ratio"), "ratio");
      if (f.contains("scale")) fc.scale = coefficient_from(f.at("scale"));
      cfg.field = fc;
    }
    if (j.contains("population")) {
      const json& p = j.at("population");
      PopulationConfig pc;
      pc.r = p.contains("r") ? trig_poly_from(p.at("r")) : TrigPoly(1.0);
      pc.k = trig_poly_from(p.at("k"));
      pc.b = trig_poly_from(p.at("b"));
      pc.s = detail::number(p.at("s"), "s");
      if (p.contains("horizon")) pc.horizon = detail::number(p.at("horizon"), "horizon");
      cfg.population = pc;
    }
    if (j.contains("numerics")) {
      const json& n = j.at("numerics");
      Numerics& d = cfg.numerics;
      for (auto& [key, slot] : {std::pair<const char*, double*>{"h", &d.h}, {"t_run", &d.t_run},
                                {"t_eval", &d.t_eval}, {"x_max", &d.x_max}, {"delta_sep", &d.delta_sep},
                                {"delta_match", &d.delta_match}, {"target_width", &d.target_width},
                                {"report_step", &d.report_step}, {"delta_track", &d.delta_track}}) {
        if (n.contains(key)) *slot = detail::number(n.at(key), key);
      }
    }
    if (j.contains("task")) {
      const json& t = j.at("task");
      TaskParams& tp = cfg.task;
      const auto opt_num = [&](const char* key, std::optional<double>& slot) {
        if (t.contains(key)) slot = detail::number(t.at(key), key);
      };
      opt_num("eps", tp.eps);
      opt_num("eps_from", tp.eps_from);
      opt_num("eps_to", tp.eps_to);
      opt_num("eps_lo", tp.eps_lo);
      opt_num("eps_hi", tp.eps_hi);
      opt_num("origin", tp.origin);
      if (t.contains("steps")) tp.steps = t.at("steps").get<int>();
      if (t.contains("x0")) tp.x0 = t.at("x0").get<std::vector<double>>();
      if (t.contains("branch")) tp.branch = t.at("branch").get<std::string>();
      if (t.contains("windows")) {
        for (const auto& w : t.at("windows")) {
          if (!w.is_array() || w.size() != 2) throw ConfigError("each window is a [T, tau] pair");
          tp.windows.emplace_back(w[0].get<double>(), w[1].get<double>());
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

// ---- CSV -----------------------------------------------------------------

/// 15 significant digits, '.' decimal point whatever the global locale.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(15);
  os << v;
  return os.str();
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

inline void write_scan_csv(std::ostream& os, const std::vector<ScanRow>& rows) {
  os << "eps,count,converged,l0,m0,u0,sep_um,sep_ml,sep_ul,"
        "gamma_l_lower,gamma_u_lower,stability_lower,"
        "gamma_l_middle,gamma_u_middle,stability_middle,"
        "gamma_l_upper,gamma_u_upper,stability_upper,error\n";
  const auto lyap = [&](const std::optional<LyapBounds>& lb, const std::optional<Stability>& st) {
    os << (lb ? fmt(lb->gamma_l) : "") << ',' << (lb ? fmt(lb->gamma_u) : "") << ','
       << (st ? to_string(*st) : "") << ',';
  };
  for (const auto& r : rows) {
    os << fmt(r.epsilon) << ',';
    if (!r.ok()) {
      os << ",,,,,,,,,,,,,,,,," << csv_quote(r.error) << '\n';
      continue;
    }
    os << r.count << ',' << (r.converged ? 1 : 0) << ',' << fmt(r.l0) << ',' << fmt(r.m0) << ',' << fmt(r.u0)
       << ',' << fmt(r.sep_upper_middle) << ',' << fmt(r.sep_middle_lower) << ',' << fmt(r.sep_upper_lower)
       << ',';
    lyap(r.lyap_l, r.stab_l);
    lyap(r.lyap_m, r.stab_m);
    lyap(r.lyap_u, r.stab_u);
    os << '\n';
  }
}

inline void write_bisect_csv(std::ostream& os, const BifurcationReport& r) {
  os << "predicate,eps_lo,eps_hi,midpoint,width,value_lo,value_hi,iterations,evaluations,target_width,flagged\n";
  os << r.predicate << ',' << fmt(r.lo) << ',' << fmt(r.hi) << ',' << fmt(r.midpoint()) << ',' << fmt(r.width())
     << ',' << (r.value_lo ? 1 : 0) << ',' << (r.value_hi ? 1 : 0) << ',' << r.iterations << ',' << r.evaluations
     << ',' << fmt(r.target_width) << ',' << r.flagged.size() << '\n';
}

inline json to_json(const BranchSummary& w) {
  json j{{"eps", w.epsilon},
         {"count", w.count},
         {"converged", w.converged},
         {"sep_upper_middle", w.sep_upper_middle},
         {"sep_middle_lower", w.sep_middle_lower},
         {"sep_upper_lower", w.sep_upper_lower},
         {"max_drift", w.max_drift}};
  if (w.l0) j["l0"] = *w.l0;
  if (w.m0) j["m0"] = *w.m0;
  if (w.u0) j["u0"] = *w.u0;
  // JSON has no infinity; absent pairs are reported as null.
  for (auto& [k, v] : j.items()) {
    if (v.is_number_float() && !std::isfinite(v.get<double>())) v = nullptr;
  }
  return j;
}

inline json to_json(const Probe& p) {
  json j{{"eps", p.epsilon}, {"value", p.value}, {"flagged", p.flagged}, {"note", p.note}};
  if (p.branches) j["branches"] = to_json(*p.branches);
  return j;
}

/// Structured report of a bisection.
inline json to_json(const BifurcationReport& r) {
  return {{"predicate", r.predicate},
          {"bracket", {r.lo, r.hi}},
          {"midpoint", r.midpoint()},
          {"width", r.width()},
          {"iterations", r.iterations},
          {"evaluations", r.evaluations},
          {"target_width", r.target_width},
          {"widenings", r.widenings},
          {"flagged", r.flagged},
          {"witness_lo", to_json(r.witness_lo)},
          {"witness_hi", to_json(r.witness_hi)}};
}

inline void write_lyap_csv(std::ostream& os, const std::vector<LyapBounds>& rows) {
  os << "T,tau,origin,gamma_l,gamma_u,width,sign\n";
  for (const auto& b : rows) {
    os << fmt(b.T) << ',' << fmt(b.tau) << ',' << fmt(b.origin) << ',' << fmt(b.gamma_l) << ',' << fmt(b.gamma_u)
       << ',' << fmt(b.gamma_u - b.gamma_l) << ',' << to_string(b.sign) << '\n';
  }
}

struct OutcomeRow {
  double eps = 0.0;
  double x0 = 0.0;
  Outcome outcome;
};

inline void write_outcomes_csv(std::ostream& os, const std::vector<OutcomeRow>& rows) {
  os << "eps,x0,outcome,extinction_time,attained_branch,attained_level\n";
  for (const auto& r : rows) {
    os << fmt(r.eps) << ',' << fmt(r.x0) << ',' << to_string(r.outcome.kind) << ','
       << fmt(r.outcome.extinction_time) << ',' << to_string(r.outcome.attained) << ','
       << fmt(r.outcome.attained_level) << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,x\n";
  for (std::size_t i = 0; i < tr.samples.size(); ++i) os << fmt(tr.time_at(i)) << ',' << fmt(tr.samples[i]) << '\n';
}

/// Report-grid samples of a branch set; absent branches leave empty cells.
inline void write_branches_csv(std::ostream& os, const BranchSet& s) {
  os << "t,l,m,u\n";
  const Branch* grid = s.upper ? &*s.upper : s.lower ? &*s.lower : s.middle ? &*s.middle : nullptr;
  if (!grid) return;
  const auto cell = [](const std::optional<Branch>& b, std::size_t i) {
    return b && i < b->samples.size() ? fmt(b->samples[i]) : std::string();
  };
  for (std::size_t i = 0; i < grid->samples.size(); ++i) {
    os << fmt(grid->time_at(i)) << ',' << cell(s.lower, i) << ',' << cell(s.middle, i) << ',' << cell(s.upper, i)
       << '\n';
  }
}

// ---- SVG -----------------------------------------------------------------

/// Branch values at t = 0 against eps. Attractive pieces are solid,
/// repulsive ones dashed, undetermined ones dotted grey with a ring at each
/// point.
inline std::string svg_diagram(const std::vector<ScanRow>& rows, const std::string& title = "") {
  constexpr double W = 640;
  constexpr double H = 420;
  constexpr double L = 60;
  constexpr double R = 20;
  constexpr double T = 30;
  constexpr double B = 40;
  double e0 = std::numeric_limits<double>::infinity();
  double e1 = -e0;
  double y0 = e0;
  double y1 = -e0;
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    e0 = std::min(e0, r.epsilon);
    e1 = std::max(e1, r.epsilon);
    for (const auto& v : {r.l0, r.m0, r.u0}) {
      if (!v) continue;
      y0 = std::min(y0, *v);
      y1 = std::max(y1, *v);
    }
  }
  if (!std::isfinite(e0)) e0 = 0.0, e1 = 1.0;
  if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
  if (e1 - e0 <= 0.0) e0 -= 0.5, e1 += 0.5;
  if (y1 - y0 <= 0.0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const auto px = [&](double e) { return L + (e - e0) / (e1 - e0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  os << "<g stroke=\"black\" fill=\"none\"><path d=\"M" << L << ' ' << T << " V" << H - B << " H" << W - R
     << "\"/></g>\n";
  os << "<g font-size=\"11\" text-anchor=\"middle\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double e = e0 + (e1 - e0) * i / 4.0;
    const double y = y0 + (y1 - y0) * i / 4.0;
    os << "<line x1=\"" << px(e) << "\" y1=\"" << H - B << "\" x2=\"" << px(e) << "\" y2=\"" << H - B + 5
       << "\" stroke=\"black\"/><text x=\"" << px(e) << "\" y=\"" << H - B + 18 << "\">" << fmt(e).substr(0, 8)
       << "</text>\n";
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << L << "\" y2=\"" << py(y)
       << "\" stroke=\"black\"/><text x=\"" << L - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
       << fmt(y).substr(0, 7) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 6 << "\">eps</text>\n";
  os << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 14 " << (T + H - B) / 2
     << ")\">x(0)</text>\n</g>\n";

  const auto style = [](std::optional<Stability> s) -> std::string {
    switch (s.value_or(Stability::Undetermined)) {
      case Stability::Attractive: return "stroke=\"#1f4e9c\" stroke-width=\"2\"";
      case Stability::Repulsive: return "stroke=\"#b22222\" stroke-width=\"2\" stroke-dasharray=\"6 4\"";
      case Stability::Undetermined: return "stroke=\"#888\" stroke-width=\"1.5\" stroke-dasharray=\"2 3\"";
    }
    return "";
  };
  using Slot = std::pair<std::optional<double> ScanRow::*, std::optional<Stability> ScanRow::*>;
  for (const Slot& slot : {Slot{&ScanRow::l0, &ScanRow::stab_l}, Slot{&ScanRow::m0, &ScanRow::stab_m},
                           Slot{&ScanRow::u0, &ScanRow::stab_u}}) {
    const ScanRow* prev = nullptr;
    for (const auto& r : rows) {
      const auto& v = r.*slot.first;
      if (!r.ok() || !v) {
        prev = nullptr;
        continue;
      }
      const auto st = r.*slot.second;
      if (prev) {
        const auto pst = prev->*slot.second;
        // A piece keeps a style only when both ends agree on it.
        const auto seg = pst == st ? st : std::optional<Stability>(Stability::Undetermined);
        os << "<line x1=\"" << px(prev->epsilon) << "\" y1=\"" << py(*(prev->*slot.first)) << "\" x2=\""
           << px(r.epsilon) << "\" y2=\"" << py(*v) << "\" " << style(seg) << "/>\n";
      }
      if (st.value_or(Stability::Undetermined) == Stability::Undetermined) {
        os << "<circle cx=\"" << px(r.epsilon) << "\" cy=\"" << py(*v)
           << "\" r=\"3\" fill=\"none\" stroke=\"#888\"/>\n";
      } else {
        os << "<circle cx=\"" << px(r.epsilon) << "\" cy=\"" << py(*v) << "\" r=\"1.5\" fill=\"black\"/>\n";
      }
      prev = &r;
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace qpbif
