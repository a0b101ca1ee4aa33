#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "confflow/enclosure.hpp"
#include "confflow/errors.hpp"
#include "confflow/profiles.hpp"
#include "confflow/radial_harmonic.hpp"

namespace confflow {

// One capacity sample per step time: cap_bg = c(Sigma_t, g) and the r^{2-n}
// coefficient b of the evolution potential (b = (1-eps)^k cap_bg).
struct LedgerEntry {
  double t = 0.0;
  double cap_bg = 0.0;
  double b_coeff = 0.0;
};

// State of the discrete flow at t = k*eps.  u is the accumulated conformal
// factor u_t; rho and v describe the enclosure slice active on
// [k eps, (k+1) eps).  Values are immutable once the state is built.
struct FlowState {
  double t = 0.0;
  long k = 0;
  double eps = 0.0;
  RadialProfile u;
  double rho = 0.0;
  HarmonicSolution v;
  double cap_bg = 0.0;
  double cap_flow = 0.0;
  double area_flow = 0.0;
  double area_bg = 0.0;
  double umin = 0.0;
  double vmin = 0.0;
  double r_max_est = 0.0;  // running fit of rho(t) e^{-2t/(n-2)}
  std::vector<LedgerEntry> ledger;
};

struct TraceRow {
  double t = 0, rho = 0, rho_normalized = 0;
  double area_flow = 0, area_bg = 0;
  double mass = 0, cap_bg = 0, cap_flow = 0, mtilde = 0;
  double b_coeff = 0, B_integral = 0;
  double umin = 0, vmin = 0;
};

struct FlowTrace {
  int n = 3;
  double eps = 0.0;  // 0 marks an extrapolated trace
  double t_max = 0.0;
  double m0 = 0.0;
  double rho0 = 0.0;
  double r_max_fit = 0.0;
  std::size_t grid_points = 0;
  double r_out_mult = 0.0, r_min_frac = 0.0;
  std::string scenario;       // serialized construction recipe
  double route_gap = 0.0;     // max |mass (ledger route) - mass (tail route)|
  double order_estimate = 0.0;  // extrapolation only
  std::vector<TraceRow> rows;
};

namespace detail {

inline void check_scheme_bounds(const RadialProfile& u, const HarmonicSolution& v, double a_k,
                                double T_bound) {
  const double slack = 1e-12;
  const double lo = std::pow(4.0, -T_bound);
  for (double x : u.values()) {
    if (x > 1.0 + slack || x < lo * (1.0 - slack) - slack)
      throw numeric_error("flow: u left [4^{-T}, 1]");
  }
  for (double x : v.profile.values()) {
    if (x > slack || x < -a_k * (1.0 + slack) - slack)
      throw numeric_error("flow: v left [-(1-eps)^k, 0]");
  }
}

// capacity ledger entry + bookkeeping cross-check of the b coefficient
inline LedgerEntry make_ledger_entry(const BackgroundMetric& metric, const HarmonicSolution& v,
                                     double t, double rho) {
  LedgerEntry e;
  e.t = t;
  e.cap_bg = capacity(metric.U, rho);
  e.b_coeff = v.capacity_coeff;
  const double expect = -v.asymptote * e.cap_bg;
  if (std::fabs(e.b_coeff - expect) > 1e-9 * std::max(1.0, std::fabs(expect)))
    throw numeric_error("flow: potential coefficient disagrees with direct capacity");
  return e;
}

inline double enclosure_window_hi(const BackgroundMetric& metric, double t, double rho_prev,
                                  double r_max_est) {
  const double hi =
      std::max(4.0 * r_max_est * std::exp(2.0 * t / (metric.n - 2)), 10.0 * rho_prev);
  return std::min(hi, metric.grid->r_out());
}

}  // namespace detail

// Flow state at t = 0: the initial enclosure (the outermost minimizing sphere
// not inside rho0), its evolution potential with asymptote -1, and the first
// ledger sample.
inline FlowState initial_state(const BackgroundMetric& metric, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw config_error("flow: eps must lie in (0, 0.5)");
  FlowState s;
  s.t = 0.0;
  s.k = 0;
  s.eps = eps;
  s.u = constant_profile(metric.grid, 1.0);
  const double hi = detail::enclosure_window_hi(metric, 0.0, metric.rho0, metric.rho0);
  const Enclosure enc = outermost_min_enclosure(metric.U, metric.rho0, hi);
  s.rho = enc.rho;
  s.v = potential(metric.U, s.rho, 0.0, -1.0);
  s.ledger.push_back(detail::make_ledger_entry(metric, s.v, 0.0, s.rho));
  s.cap_bg = s.ledger.back().cap_bg;
  s.cap_flow = s.cap_bg;
  s.area_flow = enc.area;
  s.area_bg = sphere_area(metric.U, s.rho);
  s.umin = 1.0;
  s.vmin = s.v.profile.min_value();
  s.r_max_est = s.rho;
  return s;
}

// One step of the discrete scheme: integrate u across [k eps, (k+1) eps) with
// the piecewise-constant potential, move to the outermost minimizing
// enclosure of the previous slice in the updated metric, and solve the new
// potential with asymptote -(1-eps)^{k+1}.
inline FlowState step(const FlowState& state, const BackgroundMetric& metric) {
  FlowState s;
  s.k = state.k + 1;
  s.eps = state.eps;
  s.t = s.k * state.eps;
  s.u = axpy(state.u, state.eps, state.v.profile);
  const double a = s.u.tail().value;  // (1-eps)^{k+1}, tracked exactly

  const RadialProfile phi = multiply(s.u, metric.U);
  const double hi = detail::enclosure_window_hi(metric, s.t, state.rho, state.r_max_est);
  const Enclosure enc = outermost_min_enclosure(phi, state.rho, hi);
  s.rho = enc.rho;
  if (s.rho < state.rho) throw numeric_error("flow: enclosure radius decreased");

  s.v = potential(metric.U, s.rho, 0.0, -a);
  detail::check_scheme_bounds(s.u, s.v, a, s.t);

  s.ledger = state.ledger;
  s.ledger.push_back(detail::make_ledger_entry(metric, s.v, s.t, s.rho));
  s.cap_bg = s.ledger.back().cap_bg;
  s.cap_flow = capacity(phi, s.rho);
  s.area_flow = enc.area;
  s.area_bg = sphere_area(metric.U, s.rho);
  s.umin = s.u.min_value();
  s.vmin = s.v.profile.min_value();
  s.r_max_est = std::max(state.r_max_est, s.rho * std::exp(-2.0 * s.t / (metric.n - 2)));
  return s;
}

// Route A mass series: m(t) = m0 e^{-2t} + 2 e^{-t} int_0^t e^{-s} cap_bg ds,
// the time integral by trapezoid over the ledger samples.
inline std::vector<double> mass_series_from_ledger(const std::vector<LedgerEntry>& ledger,
                                                   double m0) {
  std::vector<double> m(ledger.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < ledger.size(); ++k) {
    const double t = ledger[k].t;
    if (k > 0) {
      const double dt = t - ledger[k - 1].t;
      acc += 0.5 * dt *
             (std::exp(-ledger[k - 1].t) * ledger[k - 1].cap_bg + std::exp(-t) * ledger[k].cap_bg);
    }
    m[k] = m0 * std::exp(-2.0 * t) + 2.0 * std::exp(-t) * acc;
  }
  return m;
}

inline std::vector<double> mass_series(const FlowTrace& trace, double m0) {
  std::vector<LedgerEntry> ledger(trace.rows.size());
  for (std::size_t k = 0; k < trace.rows.size(); ++k)
    ledger[k] = {trace.rows[k].t, trace.rows[k].cap_bg, trace.rows[k].b_coeff};
  return mass_series_from_ledger(ledger, m0);
}

struct RunResult {
  FlowTrace trace;
  std::vector<FlowState> snapshots;  // states at the requested times
};

// Runs the discrete flow to T = K eps and assembles the diagnostic trace.
// Snapshot times (matched to the nearest step) return full states for the
// blow-down analysis.
inline RunResult run_flow(const BackgroundMetric& metric, double eps, double T,
                          const std::vector<double>& snapshot_times = {},
                          const std::string& scenario_label = "") {
  if (!(T > 0.0)) throw config_error("flow: horizon time must be positive");
  const long K = std::max<long>(1, std::llround(T / eps));
  const double m0 = adm_mass(metric);
  const double m0_tail = 2.0 * metric.U.tail().coeff;

  RunResult out;
  FlowTrace& tr = out.trace;
  tr.n = metric.n;
  tr.eps = eps;
  tr.t_max = K * eps;
  tr.m0 = m0;
  tr.rho0 = metric.rho0;
  tr.grid_points = metric.grid->size();
  tr.r_out_mult = metric.grid->r_out() / metric.rho0;
  tr.r_min_frac = metric.grid->r_min() / metric.rho0;
  tr.scenario = scenario_label;

  std::vector<long> snap_k(snapshot_times.size());
  for (std::size_t i = 0; i < snapshot_times.size(); ++i)
    snap_k[i] = std::clamp<long>(std::llround(snapshot_times[i] / eps), 0, K);
  out.snapshots.resize(snapshot_times.size());

  tr.rows.resize(static_cast<std::size_t>(K) + 1);
  std::vector<double> m_disc(tr.rows.size()), m_fit(tr.rows.size()), fit_res(tr.rows.size());
  FlowState s = initial_state(metric, eps);
  for (long k = 0; k <= K; ++k) {
    if (k > 0) s = step(s, metric);
    const double a = s.u.tail().value;
    const double B = s.u.tail().coeff;
    const double b = s.v.capacity_coeff;
    TraceRow& row = tr.rows[static_cast<std::size_t>(k)];
    row.t = s.t;
    row.rho = s.rho;
    row.rho_normalized = s.rho * std::pow(a, 2.0 / (metric.n - 2));
    row.area_flow = s.area_flow;
    row.area_bg = s.area_bg;
    row.cap_bg = s.cap_bg;
    row.cap_flow = s.cap_flow;
    row.mtilde = a * a * m0_tail + a * (B - b);
    row.b_coeff = b;
    row.B_integral = B;
    row.umin = s.umin;
    row.vmin = s.vmin;

    const RadialProfile phi = multiply(s.u, metric.U);
    const TailFit fit = fit_tail(phi, a, s.rho);
    m_disc[k] = 2.0 * a * (B + a * metric.U.tail().coeff);
    m_fit[k] = 2.0 * a * fit.coeff;
    fit_res[k] = std::fabs(a) * fit.residual;
    for (std::size_t i = 0; i < snap_k.size(); ++i)
      if (snap_k[i] == k) out.snapshots[i] = s;
  }
  tr.r_max_fit = s.r_max_est;

  const std::vector<double> mass = mass_series_from_ledger(s.ledger, m0);
  double route_gap = 0.0;
  const double scale = std::max(1.0, std::fabs(m0));
  for (std::size_t k = 0; k < tr.rows.size(); ++k) {
    tr.rows[k].mass = mass[k];
    if (std::fabs(m_fit[k] - m_disc[k]) > 1e-5 * scale + 20.0 * fit_res[k])
      throw numeric_error("flow: tail-fit mass disagrees with tracked expansion");
    const double quad_err = std::fabs(mass[k] - m_disc[k]) + 1e-7 * scale;
    if (std::fabs(mass[k] - m_fit[k]) > 10.0 * quad_err)
      throw numeric_error("flow: mass routes disagree beyond quadrature estimate");
    route_gap = std::max(route_gap, std::fabs(mass[k] - m_disc[k]));
  }
  tr.route_gap = route_gap;
  return out;
}

// Per-row residual of m'(t) + 2 (m(t) - cap_flow(t)); centered differences,
// one-sided at the ends.
inline std::vector<double> mass_ode_residual(const FlowTrace& trace) {
  const auto& rows = trace.rows;
  if (rows.size() < 3) throw config_error("mass_ode_residual: need at least 3 rows");
  std::vector<double> res(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    double dm;
    if (k == 0)
      dm = (rows[1].mass - rows[0].mass) / (rows[1].t - rows[0].t);
    else if (k + 1 == rows.size())
      dm = (rows[k].mass - rows[k - 1].mass) / (rows[k].t - rows[k - 1].t);
    else
      dm = (rows[k + 1].mass - rows[k - 1].mass) / (rows[k + 1].t - rows[k - 1].t);
    res[k] = dm + 2.0 * (rows[k].mass - rows[k].cap_flow);
  }
  return res;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

struct VanishingMassReport {
  double mtilde_identity = 0.0;   // max | mtilde - (e^{-2t} m0 + e^{-t}(B - b)) |
  double mass_identity = 0.0;     // max | m - (e^{-2t} m0 + 2 e^{-t} B) |
  double etb_violation = 0.0;     // max relative decrease of e^t b(t)
  double terminal_mtilde = 0.0;   // |mtilde(T)|
  double mtilde_at_half = 0.0;    // |mtilde(0.5)| for decay ratios
};

inline VanishingMassReport vanishing_mass_checks(const FlowTrace& trace) {
  const auto& rows = trace.rows;
  if (rows.empty() || rows.back().t < 4.0 - 1e-9)
    throw config_error("vanishing_mass_checks: trace must span T >= 4");
  VanishingMassReport rep;
  const double m0 = trace.m0;
  const double dt = rows.size() > 1 ? rows[1].t - rows[0].t : 1.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const double e1 = std::exp(-r.t), e2 = std::exp(-2.0 * r.t);
    rep.mtilde_identity =
        std::max(rep.mtilde_identity, std::fabs(r.mtilde - (e2 * m0 + e1 * (r.B_integral - r.b_coeff))));
    rep.mass_identity =
        std::max(rep.mass_identity, std::fabs(r.mass - (e2 * m0 + 2.0 * e1 * r.B_integral)));
    if (k > 0) {
      const double prev = std::exp(rows[k - 1].t) * rows[k - 1].b_coeff;
      const double cur = std::exp(r.t) * r.b_coeff;
      rep.etb_violation = std::max(rep.etb_violation, (prev - cur) / std::max(1.0, std::fabs(prev)));
    }
    if (std::fabs(r.t - 0.5) <= 0.5 * dt + 1e-12 && rep.mtilde_at_half == 0.0)
      rep.mtilde_at_half = std::fabs(r.mtilde);
  }
  rep.terminal_mtilde = std::fabs(rows.back().mtilde);
  return rep;
}

// Richardson extrapolation of a trace family at eps, eps/2, ...: polynomial
// extrapolation in eps to 0 (Neville) on every column, over the common
// (coarsest) step times.  First-order error is removed by a pair; each extra
// member removes one more order.
inline FlowTrace extrapolate(std::vector<FlowTrace> traces) {
  if (traces.size() < 2) throw config_error("extrapolate: need at least 2 traces");
  std::sort(traces.begin(), traces.end(),
            [](const FlowTrace& x, const FlowTrace& y) { return x.eps > y.eps; });
  for (std::size_t i = 1; i < traces.size(); ++i) {
    if (traces[i].scenario != traces[0].scenario || traces[i].n != traces[0].n)
      throw config_error("extrapolate: traces from different scenarios");
    if (std::fabs(traces[i].t_max - traces[0].t_max) > 1e-9)
      throw config_error("extrapolate: traces with different horizons");
  }
  const FlowTrace& coarse = traces[0];
  // row index of time t in trace i; requires nested step times
  auto row_at = [](const FlowTrace& tr, double t) -> const TraceRow& {
    const auto k = static_cast<std::size_t>(std::llround(t / tr.eps));
    if (k >= tr.rows.size() || std::fabs(tr.rows[k].t - t) > 1e-9)
      throw config_error("extrapolate: step times are not nested");
    return tr.rows[k];
  };

  FlowTrace out = coarse;
  out.eps = 0.0;
  const std::size_t M = traces.size();
  std::vector<double> epss(M);
  for (std::size_t i = 0; i < M; ++i) epss[i] = traces[i].eps;

  auto neville = [&](std::vector<double> y) {
    for (std::size_t lvl = 1; lvl < M; ++lvl)
      for (std::size_t i = 0; i + lvl < M; ++i)
        y[i] = y[i + 1] + (y[i + 1] - y[i]) * epss[i + lvl] / (epss[i] - epss[i + lvl]);
    return y[0];
  };

  double num = 0.0, den = 0.0;  // order estimate from the finest triple
  for (std::size_t k = 0; k < coarse.rows.size(); ++k) {
    const double t = coarse.rows[k].t;
    std::vector<const TraceRow*> rs(M);
    for (std::size_t i = 0; i < M; ++i) rs[i] = &row_at(traces[i], t);
    auto col = [&](auto field) {
      std::vector<double> y(M);
      for (std::size_t i = 0; i < M; ++i) y[i] = rs[i]->*field;
      return neville(y);
    };
    TraceRow& row = out.rows[k];
    row.t = t;
    row.rho = col(&TraceRow::rho);
    row.rho_normalized = col(&TraceRow::rho_normalized);
    row.area_flow = col(&TraceRow::area_flow);
    row.area_bg = col(&TraceRow::area_bg);
    row.mass = col(&TraceRow::mass);
    row.cap_bg = col(&TraceRow::cap_bg);
    row.cap_flow = col(&TraceRow::cap_flow);
    row.mtilde = col(&TraceRow::mtilde);
    row.b_coeff = col(&TraceRow::b_coeff);
    row.B_integral = col(&TraceRow::B_integral);
    row.umin = col(&TraceRow::umin);
    row.vmin = col(&TraceRow::vmin);
    if (M >= 3) {
      num += std::fabs(rs[M - 3]->mass - rs[M - 2]->mass);
      den += std::fabs(rs[M - 2]->mass - rs[M - 1]->mass);
    }
  }
  if (M >= 3 && den > 0.0 && num > 0.0) {
    const double ratio = epss[M - 2] / epss[M - 1];
    out.order_estimate = std::log(num / den) / std::log(ratio);
  } else {
    out.order_estimate = 1.0;
  }
  return out;
}

}  // namespace confflow
