#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "confflow/errors.hpp"
#include "confflow/flow.hpp"
#include "confflow/profiles.hpp"

namespace confflow {

// Blow-down of a flow state: radii are rescaled by the factor that returns
// the current enclosure to unit scale and the conformal factor is divided by
// its own asymptote a(t) = (1-eps)^{floor(t/eps)} (the exact discrete
// counterpart of e^{-t}; the continuum scaling is recovered as eps -> 0).
struct NormalizedState {
  double t = 0.0;
  RadialProfile U_t;  // rescaled accumulated factor, -> 1 + (M/2) r^{2-n}
  RadialProfile V_t;  // rescaled evolution potential, -> -1 + (M/2) r^{2-n}
  RadialProfile W_t;  // (U_t - V_t)/2, -> 1
  double rho_star = 0.0;  // normalized enclosure radius
  double M_limit = 0.0;   // running estimate of lim m(t) from the u tail
};

inline NormalizedState blow_down(const FlowState& state, const BackgroundMetric& metric) {
  const int n = metric.n;
  const double a = state.u.tail().value;
  const double lambda = std::pow(a, -2.0 / (n - 2));
  const RadialGrid& g = *metric.grid;

  NormalizedState out;
  out.t = state.t;
  out.rho_star = state.rho / lambda;
  if (out.rho_star < g.r_min())
    throw numeric_error("blow_down: normalized radius below grid support");
  out.M_limit = 2.0 * a * (state.u.tail().coeff + a * metric.U.tail().coeff);

  auto resample = [&](const RadialProfile& f, double scale) {
    std::vector<double> v(g.size()), d(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double r = lambda * g.nodes[j];
      v[j] = f(r) / scale;
      d[j] = f.logderiv(r) / scale;
    }
    TailModel t;
    t.value = f.tail().value / scale;
    t.coeff = f.tail().coeff * std::pow(lambda, 2.0 - n) / scale;
    t.order = f.tail().order;
    return RadialProfile(metric.grid, std::move(v), std::move(d), t);
  };
  out.U_t = resample(state.u, a);
  out.V_t = resample(state.v.profile, a);
  out.W_t = axpy(out.U_t, -1.0, out.V_t);  // then halve
  {
    std::vector<double> v = out.W_t.values(), d = out.W_t.logslopes();
    for (auto& x : v) x *= 0.5;
    for (auto& x : d) x *= 0.5;
    TailModel t = out.W_t.tail();
    t.value *= 0.5;
    t.coeff *= 0.5;
    out.W_t = RadialProfile(metric.grid, std::move(v), std::move(d), t);
  }
  return out;
}

// Sup-norm gaps against the mass-M Schwarzschild limit profiles over the
// normalized region r >= r_region_lo.
struct GapReport {
  double u_gap = 0.0;    // sup |U_t - (1 + M/2 r^{2-n})|
  double v_gap = 0.0;    // sup |V_t - (-1 + M/2 r^{2-n})|
  double w_gap = 0.0;    // sup |W_t - 1|
  double rho_gap = 0.0;  // |rho_star - (M/2)^{1/(n-2)}|
};

inline GapReport convergence_metrics(const NormalizedState& ns, double M, double r_region_lo) {
  if (!(M > 0.0)) throw config_error("convergence_metrics: mass estimate must be positive");
  const RadialGrid& g = ns.U_t.grid();
  const int n = g.n;
  GapReport rep;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = g.nodes[j];
    if (r < r_region_lo) continue;
    const double sch = M / 2.0 * std::pow(r, 2.0 - n);
    rep.u_gap = std::max(rep.u_gap, std::fabs(ns.U_t.values()[j] - (1.0 + sch)));
    rep.v_gap = std::max(rep.v_gap, std::fabs(ns.V_t.values()[j] - (-1.0 + sch)));
    rep.w_gap = std::max(rep.w_gap, std::fabs(ns.W_t.values()[j] - 1.0));
  }
  rep.rho_gap = std::fabs(ns.rho_star - std::pow(M / 2.0, 1.0 / (n - 2)));
  return rep;
}

// A = n omega_n (2M)^{(n-1)/(n-2)} inverted for M.
inline double horizon_mass_relation(double area, int n) {
  if (!(area > 0.0)) throw config_error("horizon_mass_relation: area must be positive");
  return 0.5 * std::pow(area / (n * unit_ball_volume(n)), (n - 2.0) / (n - 1.0));
}

}  // namespace confflow
