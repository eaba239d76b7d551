// qpbif: command-line front end for branch location, bifurcation search,
// Lyapunov bounds and population runs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpbif/io.hpp"

namespace {

using namespace qpbif;

enum Exit { kOk = 0, kConfig = 2, kPredicate = 3, kNumerical = 4 };

struct Common {
  std::string config;
  std::optional<double> h;
  std::optional<double> t_run;
  std::optional<double> t_eval;
  std::optional<double> x_max;
  std::optional<double> delta_sep;
  std::optional<double> target_width;
  unsigned jobs = 1;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--h", c.h, "integration step");
  app->add_option("--t-run", c.t_run, "pullback run length");
  app->add_option("--t-eval", c.t_eval, "half width of the evaluation window");
  app->add_option("--x-max", c.x_max, "escape guard");
  app->add_option("--delta-sep", c.delta_sep, "branch separation threshold");
  app->add_option("--target-width", c.target_width, "bisection target width");
  app->add_option("--jobs", c.jobs, "worker threads for sweeps (0 = all cores)");
  app->add_option("-o,--out", c.out, "output file (default stdout)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  Numerics& n = cfg.numerics;
  if (c.h) n.h = *c.h;
  if (c.t_run) n.t_run = *c.t_run;
  if (c.t_eval) n.t_eval = *c.t_eval;
  if (c.x_max) n.x_max = *c.x_max;
  if (c.delta_sep) n.delta_sep = *c.delta_sep;
  if (c.target_width) n.target_width = *c.target_width;
  cfg.validate();
  return cfg;
}

template <class Write>
void emit(const std::string& path, Write&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  write(os);
}

double need(const std::optional<double>& flag, const std::optional<double>& file, const char* name) {
  if (flag) return *flag;
  if (file) return *file;
  throw ConfigError(std::string("missing parameter '") + name + "' (flag or task section)");
}

int cmd_classify(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const CubicField f = cfg.cubic();
  const RegimeClass rc = classify_regime(f);
  const auto yn = [](bool b) { return b ? "true" : "false"; };
  emit(c.out, [&](std::ostream& os) {
    os << "regime: " << to_string(rc.kind) << '\n';
    os << "c_pos: " << yn(rc.c_pos) << '\n';
    os << "a_neg: " << yn(rc.a_neg) << '\n';
    os << "b_nonneg: " << yn(rc.b_nonneg) << '\n';
    os << "b_pos: " << yn(rc.b_pos) << '\n';
    os << "a_is_const_multiple_of_b: " << yn(rc.a_is_const_multiple_of_b) << '\n';
    os << "c_plus_lt_3c_minus: " << yn(rc.c_plus_lt_3c_minus) << '\n';
    os << "c_plus_lt_3s_minus: " << yn(rc.c_plus_lt_3s_minus) << '\n';
    os << "c_bounds: " << fmt(rc.c_bounds.lo) << ' ' << fmt(rc.c_bounds.hi) << '\n';
    os << "b_bounds: " << fmt(rc.b_bounds.lo) << ' ' << fmt(rc.b_bounds.hi) << '\n';
    os << "a_bounds: " << fmt(rc.a_bounds.lo) << ' ' << fmt(rc.a_bounds.hi) << '\n';
    os << "s_minus: " << fmt(rc.s_minus) << '\n';
    os << "s_plus: " << fmt(rc.s_plus) << '\n';
    std::vector<double> freqs;
    for (const Coefficient* k : {&f.c(), &f.b(), &f.a(), &f.scale()}) {
      const auto v = k->frequencies();
      freqs.insert(freqs.end(), v.begin(), v.end());
    }
    std::sort(freqs.begin(), freqs.end());
    freqs.erase(std::unique(freqs.begin(), freqs.end()), freqs.end());
    os << "frequencies:";
    for (double w : freqs) os << ' ' << fmt(w);
    os << '\n';
    if (!rc.admits_branches()) os << "failed: " << rc.failed_hypotheses() << '\n';
  });
  return kOk;
}

struct ScanArgs {
  std::optional<double> from;
  std::optional<double> to;
  std::optional<int> steps;
  std::string svg;
};

int cmd_scan(const Common& c, const ScanArgs& a) {
  const ExperimentConfig cfg = load(c);
  const CubicField f = cfg.cubic();
  const double from = need(a.from, cfg.task.eps_from, "from");
  const double to = need(a.to, cfg.task.eps_to, "to");
  const int steps = a.steps.value_or(cfg.task.steps.value_or(11));
  if (steps < 1) throw ConfigError("steps must be at least 1");
  std::vector<double> grid;
  for (int i = 0; i < steps; ++i) grid.push_back(steps == 1 ? from : from + (to - from) * i / (steps - 1));
  const std::vector<ScanRow> rows = sweep(f, grid, cfg.numerics.branch(), c.jobs);
  emit(c.out, [&](std::ostream& os) { write_scan_csv(os, rows); });
  if (!a.svg.empty()) emit(a.svg, [&](std::ostream& os) { os << svg_diagram(rows); });
  std::size_t ok = 0;
  for (const auto& r : rows) {
    if (r.ok()) {
      ++ok;
    } else {
      std::cerr << "eps=" << fmt(r.epsilon) << ": " << r.error << '\n';
    }
  }
  return 10 * ok >= 9 * rows.size() ? kOk : kNumerical;
}

struct BranchesArgs {
  std::optional<double> eps;
};

int cmd_branches(const Common& c, const BranchesArgs& a) {
  const ExperimentConfig cfg = load(c);
  const CubicField f = cfg.cubic();
  const BranchSet s = branch_set(f, need(a.eps, cfg.task.eps, "eps"), cfg.numerics.branch());
  emit(c.out, [&](std::ostream& os) { write_branches_csv(os, s); });
  std::cerr << "count=" << s.count << " converged=" << (s.converged ? "true" : "false") << '\n';
  return kOk;
}

struct BisectArgs {
  std::optional<double> lo;
  std::optional<double> hi;
  std::string predicate = "three_branches";
  bool headline = false;
  std::string report;
};

int cmd_bisect(const Common& c, const BisectArgs& a) {
  const ExperimentConfig cfg = load(c);
  const CubicField f = cfg.cubic();
  const double lo = need(a.lo, cfg.task.eps_lo, "lo");
  const double hi = need(a.hi, cfg.task.eps_hi, "hi");
  BisectOptions bo;
  bo.target_width = cfg.numerics.target_width;
  bo.shortcut = !a.headline;
  const BranchOptions opt = cfg.numerics.branch();
  BifurcationReport rep;
  if (a.predicate == "three_branches") {
    rep = bisect_bifurcation(f, lo, hi, opt, bo);
  } else if (a.predicate == "branch_separation") {
    rep = bisect_separation(f, lo, hi, opt, bo);
  } else if (a.predicate == "transcritical") {
    rep = bisect_transcritical(f, lo, hi, opt.t_run, opt, bo);
  } else {
    throw ConfigError("unknown predicate '" + a.predicate + "'");
  }
  emit(c.out, [&](std::ostream& os) { write_bisect_csv(os, rep); });
  if (!a.report.empty()) emit(a.report, [&](std::ostream& os) { os << to_json(rep).dump(2) << '\n'; });
  std::cerr << rep.predicate << " changes in [" << fmt(rep.lo) << ", " << fmt(rep.hi) << "] after "
            << rep.iterations << " iterations\n";
  return kOk;
}

struct LyapArgs {
  std::optional<double> eps;
  std::string branch;
  std::vector<std::string> windows;
  std::optional<double> origin;
};

int cmd_lyap(const Common& c, const LyapArgs& a) {
  const ExperimentConfig cfg = load(c);
  const CubicField f = cfg.cubic();
  const double eps = need(a.eps, cfg.task.eps, "eps");
  const std::string which = !a.branch.empty() ? a.branch : cfg.task.branch.value_or("upper");
  std::vector<std::pair<double, double>> windows = cfg.task.windows;
  if (!a.windows.empty()) {
    windows.clear();
    for (const auto& w : a.windows) {
      const auto comma = w.find(',');
      if (comma == std::string::npos) throw ConfigError("window must be T,tau");
      windows.emplace_back(std::stod(w.substr(0, comma)), std::stod(w.substr(comma + 1)));
    }
  }
  if (windows.empty()) throw ConfigError("no (T, tau) windows given");
  const BranchOptions opt = cfg.numerics.branch();
  const BranchSet set = branch_set(f, eps, opt);
  const std::optional<Branch>* br = which == "upper"    ? &set.upper
                                    : which == "middle" ? &set.middle
                                    : which == "lower"  ? &set.lower
                                                        : nullptr;
  if (!br) throw ConfigError("branch must be upper, middle or lower");
  if (!*br) throw PredicateError("no " + which + " branch at this eps");
  const std::optional<double> origin = a.origin ? a.origin : cfg.task.origin;
  std::vector<LyapBounds> rows;
  for (const auto& [T, tau] : windows) rows.push_back(lyap_bounds(f, eps, **br, T, tau, origin, opt.x_max));
  emit(c.out, [&](std::ostream& os) { write_lyap_csv(os, rows); });
  return kOk;
}

struct SimulateArgs {
  std::optional<double> eps;
  std::vector<double> x0;
  std::optional<double> horizon;
  std::string traj_dir;
};

int cmd_simulate(const Common& c, const SimulateArgs& a) {
  const ExperimentConfig cfg = load(c);
  const CubicField f = cfg.cubic();
  const double eps = need(a.eps, cfg.task.eps, "eps");
  const std::vector<double> x0s = a.x0.empty() ? cfg.task.x0 : a.x0;
  if (x0s.empty()) throw ConfigError("no initial values given");
  const double horizon = a.horizon.value_or(cfg.population ? cfg.population->horizon : 2e4);
  const PopOptions po = cfg.numerics.population();
  std::vector<OutcomeRow> rows;
  for (double x0 : x0s) {
    if (!(x0 >= 0.0)) throw ConfigError("initial values must be non-negative");
    rows.push_back({eps, x0, simulate_outcome(f, eps, x0, horizon, po)});
    if (a.traj_dir.empty()) continue;
    IntegrationOptions io;
    io.h = po.branch.h;
    io.x_max = po.branch.x_max;
    io.decimation = detail::grid_steps(po.branch.report_step, io.h);
    const double t_end = rows.back().outcome.extinction_time.value_or(horizon);
    const Trajectory tr = rk4_integrate(f, eps, 0.0, x0, t_end, io);
    std::filesystem::create_directories(a.traj_dir);
    const std::string path = a.traj_dir + "/traj_eps" + fmt(eps) + "_x0" + fmt(x0) + ".csv";
    emit(path, [&](std::ostream& os) { write_trajectory_csv(os, tr); });
  }
  emit(c.out, [&](std::ostream& os) { write_outcomes_csv(os, rows); });
  return kOk;
}

struct PopulationArgs {
  std::optional<double> x0;
  std::optional<double> lo;
  std::optional<double> hi;
  std::string report;
};

int cmd_population(const Common& c, const PopulationArgs& a) {
  const ExperimentConfig cfg = load(c);
  if (!cfg.population) throw ConfigError("population subcommand needs a 'population' field definition");
  const double x0 = a.x0 ? *a.x0 : (cfg.task.x0.empty() ? throw ConfigError("missing x0") : cfg.task.x0.front());
  const double lo = need(a.lo, cfg.task.eps_lo, "lo");
  const double hi = need(a.hi, cfg.task.eps_hi, "hi");
  const double width = c.target_width.value_or(1e-6);
  const BifurcationReport rep =
      critical_intensity(cfg.population->scenario(lo, x0), x0, lo, hi, cfg.numerics.population(), width);
  emit(c.out, [&](std::ostream& os) { write_bisect_csv(os, rep); });
  if (!a.report.empty()) emit(a.report, [&](std::ostream& os) { os << to_json(rep).dump(2) << '\n'; });
  std::cerr << "survival of x0=" << fmt(x0) << " is lost in [" << fmt(rep.lo) << ", " << fmt(rep.hi) << "]\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounded solutions and bifurcations of quasiperiodic cubic equations"};
  app.set_help_flag("--help", "print this help and exit");  // --h is the step size
  app.require_subcommand(1);

  Common common;
  auto* classify = app.add_subcommand("classify", "report the hypothesis flags and regime of a field");
  add_common(classify, common);

  ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan", "branch sets over an eps grid (CSV, optional SVG)");
  add_common(scan, common);
  scan->add_option("--from", scan_args.from, "first eps");
  scan->add_option("--to", scan_args.to, "last eps");
  scan->add_option("--steps", scan_args.steps, "number of grid points");
  scan->add_option("--svg", scan_args.svg, "write the bifurcation diagram here");

  BranchesArgs branches_args;
  auto* branches = app.add_subcommand("branches", "branch samples (t, l, m, u) over the evaluation window");
  add_common(branches, common);
  branches->add_option("--eps", branches_args.eps, "parameter value");

  BisectArgs bisect_args;
  auto* bisect = app.add_subcommand("bisect", "locate a bifurcation value by bisection");
  add_common(bisect, common);
  bisect->add_option("--lo", bisect_args.lo, "lower end of the starting bracket");
  bisect->add_option("--hi", bisect_args.hi, "upper end of the starting bracket");
  bisect->add_option("--predicate", bisect_args.predicate, "three_branches | branch_separation | transcritical");
  bisect->add_flag("--headline", bisect_args.headline, "full windows at every midpoint");
  bisect->add_option("--report", bisect_args.report, "write a JSON report here");

  LyapArgs lyap_args;
  auto* lyap = app.add_subcommand("lyap", "truncated Lyapunov bounds along one branch");
  add_common(lyap, common);
  lyap->add_option("--eps", lyap_args.eps, "parameter value");
  lyap->add_option("--branch", lyap_args.branch, "upper | middle | lower");
  lyap->add_option("--window", lyap_args.windows, "T,tau (repeatable)");
  lyap->add_option("--origin", lyap_args.origin, "time where the averages start");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "forward runs from t = 0 with outcome classification");
  add_common(simulate, common);
  simulate->add_option("--eps", sim_args.eps, "parameter value");
  simulate->add_option("--x0", sim_args.x0, "initial values")->delimiter(',');
  simulate->add_option("--horizon", sim_args.horizon, "run length");
  simulate->add_option("--traj-dir", sim_args.traj_dir, "write one trajectory CSV per x0 here");

  PopulationArgs pop_args;
  auto* population = app.add_subcommand("population", "critical migration intensity for one initial value");
  add_common(population, common);
  population->add_option("--x0", pop_args.x0, "initial population");
  population->add_option("--lo", pop_args.lo, "eps where x0 survives");
  population->add_option("--hi", pop_args.hi, "eps where x0 does not survive");
  population->add_option("--report", pop_args.report, "write a JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*classify) return cmd_classify(common);
    if (*scan) return cmd_scan(common, scan_args);
    if (*branches) return cmd_branches(common, branches_args);
    if (*bisect) return cmd_bisect(common, bisect_args);
    if (*lyap) return cmd_lyap(common, lyap_args);
    if (*simulate) return cmd_simulate(common, sim_args);
    if (*population) return cmd_population(common, pop_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const HypothesisError& e) {
    std::cerr << "hypotheses not met: " << e.what() << '\n';
    return kConfig;
  } catch (const PredicateError& e) {
    std::cerr << "bisection error: " << e.what() << '\n';
    return kPredicate;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
