#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "confflow/config.hpp"
#include "confflow/errors.hpp"
#include "confflow/flow.hpp"
#include "confflow/masscap.hpp"
#include "confflow/normalize.hpp"

#include <nlohmann/json.hpp>

namespace confflow {

inline const char* kCsvHeader =
    "t,rho,rho_normalized,area_flow,area_bg,mass,cap_bg,cap_flow,mtilde,b_coeff,B_integral,"
    "umin,vmin";

// ---------------------------------------------------------------------------
// trace CSV emission / ingestion

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string trace_to_csv(const FlowTrace& tr) {
  std::ostringstream os;
  os << "# confflow trace\n";
  os << "# scenario " << tr.scenario << "\n";
  os << "# n " << tr.n << "\n";
  os << "# eps " << format_double(tr.eps) << "\n";
  os << "# t_max " << format_double(tr.t_max) << "\n";
  os << "# m0 " << format_double17(tr.m0) << "\n";
  os << "# rho0 " << format_double17(tr.rho0) << "\n";
  os << "# r_max_fit " << format_double17(tr.r_max_fit) << "\n";
  os << "# grid_points " << tr.grid_points << "\n";
  os << "# r_out_mult " << format_double(tr.r_out_mult) << "\n";
  os << "# r_min_frac " << format_double(tr.r_min_frac) << "\n";
  os << "# route_gap " << format_double17(tr.route_gap) << "\n";
  os << "# order_estimate " << format_double17(tr.order_estimate) << "\n";
  os << kCsvHeader << "\n";
  for (const auto& r : tr.rows) {
    const double cols[13] = {r.t,      r.rho,     r.rho_normalized, r.area_flow, r.area_bg,
                             r.mass,   r.cap_bg,  r.cap_flow,       r.mtilde,    r.b_coeff,
                             r.B_integral, r.umin, r.vmin};
    for (int c = 0; c < 13; ++c) os << (c ? "," : "") << format_double17(cols[c]);
    os << "\n";
  }
  return os.str();
}

inline FlowTrace trace_from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read " + path.string());
  FlowTrace tr;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ms(line.substr(1));
      std::string key;
      ms >> key;
      std::string rest;
      std::getline(ms, rest);
      rest = detail::trim(rest);
      if (key == "scenario") tr.scenario = rest;
      else if (key == "n") tr.n = std::stoi(rest);
      else if (key == "eps") tr.eps = std::stod(rest);
      else if (key == "t_max") tr.t_max = std::stod(rest);
      else if (key == "m0") tr.m0 = std::stod(rest);
      else if (key == "rho0") tr.rho0 = std::stod(rest);
      else if (key == "r_max_fit") tr.r_max_fit = std::stod(rest);
      else if (key == "grid_points") tr.grid_points = static_cast<std::size_t>(std::stoul(rest));
      else if (key == "r_out_mult") tr.r_out_mult = std::stod(rest);
      else if (key == "r_min_frac") tr.r_min_frac = std::stod(rest);
      else if (key == "route_gap") tr.route_gap = std::stod(rest);
      else if (key == "order_estimate") tr.order_estimate = std::stod(rest);
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader)
        throw config_error(path.string() + ": unexpected column header");
      header_seen = true;
      continue;
    }
    std::istringstream rs(line);
    double cols[13];
    std::string cell;
    for (int c = 0; c < 13; ++c) {
      if (!std::getline(rs, cell, ','))
        throw config_error(path.string() + ": short row");
      cols[c] = std::stod(cell);
    }
    TraceRow r;
    r.t = cols[0];
    r.rho = cols[1];
    r.rho_normalized = cols[2];
    r.area_flow = cols[3];
    r.area_bg = cols[4];
    r.mass = cols[5];
    r.cap_bg = cols[6];
    r.cap_flow = cols[7];
    r.mtilde = cols[8];
    r.b_coeff = cols[9];
    r.B_integral = cols[10];
    r.umin = cols[11];
    r.vmin = cols[12];
    tr.rows.push_back(r);
  }
  if (!header_seen) throw config_error(path.string() + ": no data");
  return tr;
}

// ---------------------------------------------------------------------------
// per-scenario verification

struct CheckResult {
  std::string name;
  bool applicable = true;
  bool pass = true;
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct ScenarioReport {
  std::string label;
  Scenario scenario;
  double m0 = 0.0;
  double M_estimate = 0.0;
  double penrose = 0.0;
  bool penrose_applicable = false;
  double cap0 = 0.0;
  double max_monotonicity_violation = 0.0;
  double area_drift_extrapolated = 0.0;
  std::vector<double> area_drift_per_eps;
  double mass_ode_max = 0.0;
  double mtilde_T = 0.0;
  double mtilde_half = 0.0;
  double rho_gap = 0.0;
  double u_gap_early = 0.0, u_gap_late = 0.0;
  double order_estimate = 0.0;
  std::vector<CheckResult> checks;
  bool all_pass = true;
};

namespace detail {

inline double relative_area_drift(const FlowTrace& tr) {
  const double a0 = tr.rows.front().area_flow;
  double worst = 0.0;
  for (const auto& r : tr.rows) worst = std::max(worst, std::fabs(r.area_flow - a0) / a0);
  return worst;
}

inline double max_mass_increase(const FlowTrace& tr) {
  double worst = 0.0;
  for (std::size_t k = 1; k < tr.rows.size(); ++k)
    worst = std::max(worst, tr.rows[k].mass - tr.rows[k - 1].mass);
  return worst;
}

inline double min_mass_capacity_margin(const FlowTrace& tr) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& r : tr.rows) worst = std::min(worst, r.mass - r.cap_flow);
  return worst;
}

inline double bounds_violation(const FlowTrace& tr) {
  // recomputed from the emitted columns so `report` can re-verify
  double worst = 0.0;
  for (const auto& r : tr.rows) {
    const double T = tr.rows.back().t;
    const double lo = std::pow(4.0, -T);
    worst = std::max(worst, lo - r.umin);
    worst = std::max(worst, r.umin > 1.0 ? r.umin - 1.0 : 0.0);
    const long k = tr.eps > 0 ? std::lround(r.t / tr.eps) : 0;
    const double a = tr.eps > 0 ? std::pow(1.0 - tr.eps, static_cast<double>(k)) : 1.0;
    worst = std::max(worst, -(r.vmin + a));  // vmin >= -a
    worst = std::max(worst, r.vmin > 0.0 ? r.vmin : 0.0);
  }
  return worst;
}

}  // namespace detail

// Evaluates the suite checks for one scenario given its trace ladder (and,
// when available, snapshot-based convergence gaps).  Gates follow the
// tolerance set; checks that need longer horizons mark themselves not
// applicable instead of failing.
inline ScenarioReport evaluate_scenario(const Scenario& sc, const BackgroundMetric& metric,
                                        const std::vector<FlowTrace>& ladder,
                                        const FlowTrace& extrapolated, const ToleranceSet& tol,
                                        const double* u_gap_early, const double* u_gap_late) {
  ScenarioReport rep;
  rep.label = sc.label;
  rep.scenario = sc;
  rep.m0 = ladder.front().m0;
  rep.order_estimate = extrapolated.order_estimate;
  const FlowTrace& finest = ladder.back();
  const double T = finest.rows.back().t;
  const double mscale = std::max(1.0, std::fabs(rep.m0));

  rep.M_estimate = extrapolated.rows.back().mass;
  rep.cap0 = finest.rows.front().cap_flow;

  auto add = [&](CheckResult c) {
    if (c.applicable && !c.pass) rep.all_pass = false;
    rep.checks.push_back(std::move(c));
  };

  {  // scheme bounds, zero violations
    double worst = 0.0;
    for (const auto& tr : ladder) worst = std::max(worst, detail::bounds_violation(tr));
    add({"scheme_bounds", true, worst <= 1e-12, worst, 1e-12, "node-wise u/v window"});
  }
  {  // mass monotonicity on the extrapolated trace; a single-member ladder
     // has no extrapolation, so the gate widens to the raw scheme error
    rep.max_monotonicity_violation = detail::max_mass_increase(extrapolated);
    const bool extrapolated_ladder = ladder.size() >= 2;
    const double thr =
        (extrapolated_ladder ? tol.mass_monotonicity
                             : std::max(tol.mass_monotonicity, finest.eps * finest.eps)) *
        mscale;
    add({"mass_monotone", true, rep.max_monotonicity_violation <= thr,
         rep.max_monotonicity_violation, thr,
         extrapolated_ladder ? "max row-to-row mass increase, extrapolated"
                             : "max row-to-row mass increase, single eps"});
  }
  {  // area constancy: refinement-decreasing and small after extrapolation
    rep.area_drift_per_eps.clear();
    for (const auto& tr : ladder) rep.area_drift_per_eps.push_back(detail::relative_area_drift(tr));
    bool decreasing = true;
    for (std::size_t i = 1; i < rep.area_drift_per_eps.size(); ++i)
      if (rep.area_drift_per_eps[i] > rep.area_drift_per_eps[i - 1] + 1e-12) decreasing = false;
    rep.area_drift_extrapolated = detail::relative_area_drift(extrapolated);
    add({"area_refinement", true, decreasing,
         rep.area_drift_per_eps.back(), rep.area_drift_per_eps.front(),
         "per-eps drift decreases under refinement"});
    add({"area_constancy", true, rep.area_drift_extrapolated <= tol.area_drift,
         rep.area_drift_extrapolated, tol.area_drift, "extrapolated relative drift"});
  }
  {  // mass-capacity inequality along the run; evaluated on the finest trace,
     // where every row belongs to an actual metric of the scheme (the
     // extrapolated rows are derived diagnostics and may dip by O(eps^2) on
     // equality-case data)
    const double margin = detail::min_mass_capacity_margin(finest);
    add({"mass_capacity", true, margin >= -tol.mass_capacity * mscale, margin,
         -tol.mass_capacity * mscale, "min (mass - cap_flow), finest eps"});
  }
  if (finest.rows.size() >= 3) {  // mass ODE residual on the finest trace
    rep.mass_ode_max = max_abs(mass_ode_residual(finest));
    const double thr = tol.mass_ode_scale * mscale * finest.eps * std::max(T, 1.0);
    add({"mass_ode", true, rep.mass_ode_max <= thr, rep.mass_ode_max, thr,
         "max |m' + 2(m - cap_flow)|, finest eps"});
  } else {
    add({"mass_ode", false, true, 0, 0, "needs at least 3 rows"});
  }
  if (T >= 4.0 - 1e-9) {  // vanishing-mass checks
    const VanishingMassReport vm = vanishing_mass_checks(finest);
    rep.mtilde_T = vm.terminal_mtilde;
    rep.mtilde_half = vm.mtilde_at_half;
    const bool degenerate = vm.mtilde_at_half <= 1e-8 * mscale;
    add({"mtilde_decay", !degenerate,
         degenerate || vm.terminal_mtilde <= tol.mtilde_ratio * vm.mtilde_at_half,
         vm.terminal_mtilde, tol.mtilde_ratio * vm.mtilde_at_half,
         degenerate ? "equality case, mtilde ~ 0 throughout" : "|mtilde(T)| vs |mtilde(0.5)|"});
    add({"etb_monotone", true, vm.etb_violation <= tol.etb_slack, vm.etb_violation,
         tol.etb_slack, "relative decrease of e^t b(t)"});
  } else {
    add({"mtilde_decay", false, true, 0, 0, "needs T >= 4"});
    add({"etb_monotone", false, true, 0, 0, "needs T >= 4"});
  }
  if (T >= 2.0 - 1e-9) {  // normalized radius convergence
    const int n = finest.n;
    const double target = std::pow(rep.M_estimate / 2.0, 1.0 / (n - 2));
    rep.rho_gap = std::fabs(extrapolated.rows.back().rho_normalized - target);
    add({"rho_convergence", true, rep.rho_gap <= tol.rho_gap * target, rep.rho_gap,
         tol.rho_gap * target, "normalized enclosure radius vs (M/2)^{1/(n-2)}"});
  } else {
    add({"rho_convergence", false, true, 0, 0, "needs T >= 2"});
  }
  {  // static Penrose gap (minimal, outer-minimizing boundary scenarios only)
    const bool applicable =
        sc.kind == "schwarzschild" || (sc.kind == "flux_family" && sc.minimal_boundary);
    rep.penrose_applicable = applicable;
    if (applicable) {
      rep.penrose = penrose_gap(metric);
      add({"penrose", true, rep.penrose >= tol.penrose_min * mscale, rep.penrose,
           tol.penrose_min * mscale, "m - (A/(n omega_n))^{(n-2)/(n-1)}/2"});
    } else {
      add({"penrose", false, true, 0, 0, "boundary not asserted minimal"});
    }
  }
  if (u_gap_early && u_gap_late) {  // sup-gap decay of the normalized factor
    rep.u_gap_early = *u_gap_early;
    rep.u_gap_late = *u_gap_late;
    const bool gate = T >= 8.0 - 1e-9;
    add({"u_gap_decay", gate, !gate || *u_gap_late <= tol.gap_decay * *u_gap_early,
         *u_gap_late, tol.gap_decay * *u_gap_early,
         gate ? "sup-gap at T vs t=2" : "reported only (needs T >= 8)"});
  } else {
    add({"u_gap_decay", false, true, 0, 0, "snapshots unavailable"});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// summary emission

inline std::string summary_text(const ScenarioReport& rep) {
  std::ostringstream os;
  os << "scenario " << serialize(rep.scenario) << "\n";
  os << "m0 " << format_double17(rep.m0) << "\n";
  os << "M_estimate " << format_double17(rep.M_estimate) << "\n";
  os << "cap_flow_initial " << format_double17(rep.cap0) << "\n";
  if (rep.penrose_applicable) os << "penrose_gap " << format_double17(rep.penrose) << "\n";
  os << "max_monotonicity_violation " << format_double17(rep.max_monotonicity_violation) << "\n";
  os << "max_area_drift_extrapolated " << format_double17(rep.area_drift_extrapolated) << "\n";
  {
    os << "area_drift_per_eps";
    for (double d : rep.area_drift_per_eps) os << " " << format_double17(d);
    os << "\n";
  }
  os << "mass_ode_residual " << format_double17(rep.mass_ode_max) << "\n";
  os << "mtilde_T " << format_double17(rep.mtilde_T) << "\n";
  os << "rho_gap " << format_double17(rep.rho_gap) << "\n";
  os << "u_gap_t2 " << format_double17(rep.u_gap_early) << "\n";
  os << "u_gap_T " << format_double17(rep.u_gap_late) << "\n";
  os << "order_estimate " << format_double17(rep.order_estimate) << "\n";
  os << "note all-sphere competitors only: outermost enclosures are searched among centered "
        "spheres\n";
  for (const auto& c : rep.checks) {
    os << "check " << c.name << " ";
    if (!c.applicable)
      os << "SKIP";
    else
      os << (c.pass ? "PASS" : "FAIL");
    os << " value " << format_double17(c.value) << " threshold " << format_double17(c.threshold)
       << " # " << c.note << "\n";
  }
  os << "result " << (rep.all_pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

inline nlohmann::ordered_json summary_json(const ScenarioReport& rep) {
  nlohmann::ordered_json j;
  j["scenario"] = serialize(rep.scenario);
  j["m0"] = rep.m0;
  j["M_estimate"] = rep.M_estimate;
  j["cap_flow_initial"] = rep.cap0;
  if (rep.penrose_applicable) j["penrose_gap"] = rep.penrose;
  j["max_monotonicity_violation"] = rep.max_monotonicity_violation;
  j["max_area_drift_extrapolated"] = rep.area_drift_extrapolated;
  j["area_drift_per_eps"] = rep.area_drift_per_eps;
  j["mass_ode_residual"] = rep.mass_ode_max;
  j["mtilde_T"] = rep.mtilde_T;
  j["rho_gap"] = rep.rho_gap;
  j["u_gap_t2"] = rep.u_gap_early;
  j["u_gap_T"] = rep.u_gap_late;
  j["order_estimate"] = rep.order_estimate;
  j["sphere_reduction"] = "outermost enclosures searched among centered spheres";
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : rep.checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["status"] = !c.applicable ? "skip" : (c.pass ? "pass" : "fail");
    cj["value"] = c.value;
    cj["threshold"] = c.threshold;
    cj["note"] = c.note;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  j["result"] = rep.all_pass ? "pass" : "fail";
  return j;
}

// ---------------------------------------------------------------------------
// orchestration

inline std::string eps_file_name(double eps) { return "trace_eps_" + format_double(eps) + ".csv"; }

// Runs one scenario over the eps ladder, writes per-eps and extrapolated
// traces plus the summary pair, and returns the evaluated report.
inline ScenarioReport run_scenario(const Scenario& sc, const std::vector<double>& eps_ladder,
                                   double t_max, const ToleranceSet& tol,
                                   const std::filesystem::path& dir, bool quiet) {
  std::filesystem::create_directories(dir);
  const BackgroundMetric metric = make_metric(sc);
  const std::string label = serialize(sc);

  std::vector<FlowTrace> ladder;
  double gap_early = 0.0, gap_late = 0.0;
  bool have_gaps = false;
  for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
    const double eps = eps_ladder[i];
    std::vector<double> snaps;
    const bool finest = (i + 1 == eps_ladder.size());
    if (finest && t_max >= 2.0) snaps = {2.0, t_max};
    RunResult rr = run_flow(metric, eps, t_max, snaps, label);
    if (finest && snaps.size() == 2) {
      const double M_fin =
          2.0 * rr.snapshots[1].u.tail().value *
          (rr.snapshots[1].u.tail().coeff + rr.snapshots[1].u.tail().value * metric.U.tail().coeff);
      const double r_lo = 4.0 * rr.trace.r_max_fit;
      gap_early = convergence_metrics(blow_down(rr.snapshots[0], metric), M_fin, r_lo).u_gap;
      gap_late = convergence_metrics(blow_down(rr.snapshots[1], metric), M_fin, r_lo).u_gap;
      have_gaps = true;
    }
    write_atomic(dir / eps_file_name(eps), trace_to_csv(rr.trace));
    ladder.push_back(std::move(rr.trace));
    if (!quiet)
      std::cout << "  " << sc.label << " eps=" << format_double(eps) << " done ("
                << ladder.back().rows.size() << " rows)\n";
  }
  FlowTrace extr = ladder.size() >= 2 ? extrapolate(ladder) : ladder.front();
  write_atomic(dir / "extrapolated.csv", trace_to_csv(extr));

  ScenarioReport rep = evaluate_scenario(sc, metric, ladder, extr, tol,
                                         have_gaps ? &gap_early : nullptr,
                                         have_gaps ? &gap_late : nullptr);
  write_atomic(dir / "summary.txt", summary_text(rep));
  write_atomic(dir / "summary.json", summary_json(rep).dump(2) + "\n");
  return rep;
}

inline int aggregate_and_write(const std::vector<ScenarioReport>& reps,
                               const std::filesystem::path& out_dir, bool quiet) {
  bool all = true;
  std::ostringstream os;
  nlohmann::ordered_json j;
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& r : reps) {
    all = all && r.all_pass;
    os << r.label << " " << (r.all_pass ? "PASS" : "FAIL") << "\n";
    nlohmann::ordered_json item;
    item["label"] = r.label;
    item["result"] = r.all_pass ? "pass" : "fail";
    items.push_back(item);
  }
  os << "suite " << (all ? "PASS" : "FAIL") << "\n";
  j["scenarios"] = items;
  j["result"] = all ? "pass" : "fail";
  write_atomic(out_dir / "summary.txt", os.str());
  write_atomic(out_dir / "summary.json", j.dump(2) + "\n");
  if (!quiet) std::cout << os.str();
  return all ? 0 : 1;
}

// Config-driven ladder over all scenario instances.
inline int run_suite(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<Scenario> scenarios = expand_scenarios(cfg);
  std::vector<ScenarioReport> reps;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    std::ostringstream name;
    name << "scenario_" << std::setw(3) << std::setfill('0') << i;
    if (!cfg.quiet) std::cout << name.str() << " [" << scenarios[i].label << "]\n";
    reps.push_back(run_scenario(scenarios[i], cfg.eps_ladder, cfg.t_max, cfg.tol,
                                std::filesystem::path(cfg.out_dir) / name.str(), cfg.quiet));
  }
  return aggregate_and_write(reps, cfg.out_dir, cfg.quiet);
}

// Recomputes extrapolation and all checks from previously written CSVs.
// Snapshot-based convergence gaps are not reproducible from the scalar
// columns and are skipped here.
inline int report_from_dir(const std::filesystem::path& out_dir, const ToleranceSet& tol,
                           bool quiet) {
  std::vector<ScenarioReport> reps;
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(out_dir))
    if (e.is_directory() && e.path().filename().string().rfind("scenario_", 0) == 0)
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw config_error("report: no scenario_* directories in " + out_dir.string());
  for (const auto& d : dirs) {
    std::vector<FlowTrace> ladder;
    for (const auto& f : std::filesystem::directory_iterator(d)) {
      const std::string name = f.path().filename().string();
      if (name.rfind("trace_eps_", 0) == 0 && name.size() > 4 &&
          name.substr(name.size() - 4) == ".csv")
        ladder.push_back(trace_from_csv(f.path()));
    }
    if (ladder.empty()) throw config_error("report: no traces in " + d.string());
    std::sort(ladder.begin(), ladder.end(),
              [](const FlowTrace& a, const FlowTrace& b) { return a.eps > b.eps; });
    const Scenario sc = parse_scenario_string(ladder.front().scenario);
    const BackgroundMetric metric = make_metric(sc);
    FlowTrace extr = ladder.size() >= 2 ? extrapolate(ladder) : ladder.front();
    write_atomic(d / "extrapolated.csv", trace_to_csv(extr));
    ScenarioReport rep = evaluate_scenario(sc, metric, ladder, extr, tol, nullptr, nullptr);
    write_atomic(d / "summary.txt", summary_text(rep));
    write_atomic(d / "summary.json", summary_json(rep).dump(2) + "\n");
    reps.push_back(std::move(rep));
  }
  return aggregate_and_write(reps, out_dir, quiet);
}

}  // namespace confflow
