#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "confflow/enclosure.hpp"
#include "confflow/errors.hpp"
#include "confflow/normalize.hpp"
#include "confflow/profiles.hpp"
#include "confflow/quadrature.hpp"
#include "confflow/radial_harmonic.hpp"

namespace confflow {

// ---------------------------------------------------------------------------
// conformal barrier

struct BarrierResult {
  RadialProfile total_factor;        // (1 + eps v)/(1 - eps) * U
  double H_boundary_toward_end = 0;  // mean curvature of the boundary in the
                                     // perturbed metric, toward the end
  double R_min = 0.0;                // min of the perturbed scalar curvature
};

// Perturbs the metric by the capacitary complement v (v = 0 on the boundary,
// v -> -1): u_eps = (1 + eps v)/(1 - eps).  The boundary becomes strictly
// mean-convex toward the hole while scalar curvature keeps its sign.
inline BarrierResult conformal_barrier(const BackgroundMetric& metric, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw config_error("conformal_barrier: eps must lie in (0,1)");
  const HarmonicSolution v = potential(metric.U, metric.rho0, 0.0, -1.0);
  const RadialGrid& g = *metric.grid;
  std::vector<double> u(g.size()), du(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    u[j] = (1.0 + eps * v.profile.values()[j]) / (1.0 - eps);
    du[j] = eps * v.profile.logslopes()[j] / (1.0 - eps);
  }
  TailModel t;
  t.value = 1.0;  // (1 - eps)/(1 - eps)
  t.coeff = eps * v.capacity_coeff / (1.0 - eps);
  t.order = static_cast<double>(g.n - 2);
  RadialProfile ueps(metric.grid, std::move(u), std::move(du), t, /*apply_limiter=*/false);

  BarrierResult out{multiply(ueps, metric.U), 0.0, 0.0};
  out.H_boundary_toward_end = mean_curvature(out.total_factor, metric.rho0);
  double rmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = g.nodes[j];
    if (r < metric.rho0) continue;
    const double R = scalar_curvature(metric, r) *
                     std::pow(ueps.values()[j], -4.0 / (g.n - 2));
    rmin = std::min(rmin, R);
  }
  out.R_min = rmin;
  return out;
}

// ---------------------------------------------------------------------------
// doubled/compactified mass identity

struct DoubledMass {
  double tail_fit = 0.0;            // ADM mass of the compactified factor
  double mass_minus_capacity = 0.0; // m - c(Sigma_rho, g)
};

// Builds the compactified conformal factor ((1 + psi)/2) U with psi the
// capacitary potential (0 on the sphere, -> 1) and reads its ADM mass from
// the tail; it must reproduce m - c(Sigma_rho, g).
inline DoubledMass doubled_compactified_mass(const BackgroundMetric& metric, double rho,
                                             double rel_tol = 1e-4) {
  if (rho < metric.rho0) throw config_error("doubled_compactified_mass: rho below rho0");
  const HarmonicSolution psi = potential(metric.U, rho, 0.0, 1.0);
  const RadialGrid& g = *metric.grid;
  std::vector<double> h(g.size()), dh(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    h[j] = 0.5 * (1.0 + psi.profile.values()[j]);
    dh[j] = 0.5 * psi.profile.logslopes()[j];
  }
  TailModel t{1.0, 0.5 * psi.capacity_coeff, static_cast<double>(g.n - 2)};
  const RadialProfile compact(metric.grid, std::move(h), std::move(dh), t);
  const RadialProfile total = multiply(compact, metric.U);

  DoubledMass out;
  const TailFit fit = fit_tail(total, 1.0, rho);
  out.tail_fit = 2.0 * fit.coeff;
  out.mass_minus_capacity = adm_mass(metric) - capacity(metric.U, rho);
  const double scale = std::max(1.0, std::fabs(out.mass_minus_capacity));
  if (std::fabs(out.tail_fit - out.mass_minus_capacity) > rel_tol * scale)
    throw numeric_error("doubled_compactified_mass: tail fit failure");
  return out;
}

// ---------------------------------------------------------------------------
// Yamabe-type functionals

struct YamabeResult {
  enum class Bc { dirichlet, neumann_robin };
  double value = 0.0;
  RadialProfile minimizer;
  Bc boundary_condition = Bc::dirichlet;
  double residual = 0.0;  // max scaled Euler-Lagrange residual at the nodes
};

namespace detail {

// Solution of the radial conformal-Laplacian equation
//   (r^{n-1} U^2 u')' + U F'(r) u = 0
// on [rho, r_out] with given u(rho), u'(rho); RK4 in log radius, one step per
// node interval.  Returns node values of u and y2 = r^{n-1} U^2 u'.
struct ConformalOde {
  std::vector<double> u, y2;
  std::vector<double> umid, y2mid;  // interval midpoints, for quadrature
  std::size_t j0 = 0;      // first node >= rho
  double u_infinity = 0.0; // value continued through the analytic tail
};

inline ConformalOde integrate_conformal_ode(const BackgroundMetric& m, double rho, double u0,
                                            double du0) {
  const RadialGrid& g = *m.grid;
  const int n = g.n;
  std::size_t j0 = g.interval(rho);
  if (g.nodes[j0] < rho) ++j0;
  ConformalOde out;
  out.j0 = j0;
  out.u.assign(g.size(), 0.0);
  out.y2.assign(g.size(), 0.0);

  auto rhs = [&](double x, double y1, double y2v, double& d1, double& d2) {
    const double r = std::exp(x);
    const double Uv = m.U(r);
    d1 = y2v * std::pow(r, 2.0 - n) / (Uv * Uv);
    d2 = r * Uv * m.flux.deriv(r) * y1;
  };
  auto rk4 = [&](double x, double hh, double& y1, double& y2v) {
    double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
    rhs(x, y1, y2v, k1a, k1b);
    rhs(x + hh / 2, y1 + hh / 2 * k1a, y2v + hh / 2 * k1b, k2a, k2b);
    rhs(x + hh / 2, y1 + hh / 2 * k2a, y2v + hh / 2 * k2b, k3a, k3b);
    rhs(x + hh, y1 + hh * k3a, y2v + hh * k3b, k4a, k4b);
    y1 += hh / 6 * (k1a + 2 * k2a + 2 * k3a + k4a);
    y2v += hh / 6 * (k1b + 2 * k2b + 2 * k3b + k4b);
  };

  double y1 = u0;
  double y2v = std::pow(rho, n - 1.0) * m.U(rho) * m.U(rho) * du0;
  double x = std::log(rho);
  if (g.nodes[j0] > rho) {  // partial step up to the first node
    rk4(x, g.lognodes[j0] - x, y1, y2v);
    x = g.lognodes[j0];
  }
  out.u[j0] = y1;
  out.y2[j0] = y2v;
  out.umid.assign(g.size(), 0.0);
  out.y2mid.assign(g.size(), 0.0);
  for (std::size_t j = j0; j + 1 < g.size(); ++j) {
    const double hh = g.lognodes[j + 1] - g.lognodes[j];
    rk4(g.lognodes[j], hh / 2, y1, y2v);  // two half steps per interval
    out.umid[j] = y1;
    out.y2mid[j] = y2v;
    rk4(g.lognodes[j] + hh / 2, hh / 2, y1, y2v);
    out.u[j + 1] = y1;
    out.y2[j + 1] = y2v;
    if (!std::isfinite(y1) || !std::isfinite(y2v))
      throw numeric_error("yamabe: shooting divergence");
  }
  // beyond r_out the flux is constant, so y2 is frozen and u picks up the
  // analytic resistance tail
  out.u_infinity = y1 + y2v * resistance_tail(m.U);
  return out;
}

// nodewise profile for the solution, frozen at its boundary value inside rho
inline RadialProfile ode_profile(const BackgroundMetric& m, const ConformalOde& ode,
                                 double tail_coeff_hint, double boundary_value) {
  const RadialGrid& g = *m.grid;
  const int n = g.n;
  std::vector<double> v(g.size()), d(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j < ode.j0) {
      v[j] = boundary_value;
      d[j] = 0.0;
    } else {
      const double r = g.nodes[j];
      const double Uv = m.U(r);
      v[j] = ode.u[j];
      d[j] = ode.y2[j] * std::pow(r, 2.0 - n) / (Uv * Uv);
    }
  }
  return RadialProfile(m.grid, std::move(v), std::move(d),
                       TailModel{ode.u_infinity, tail_coeff_hint, static_cast<double>(n - 2)},
                       /*apply_limiter=*/false);
}

// Yamabe bulk energy directly from the integrator samples:
//   n omega_n a_n int_rho^inf ( y2^2 r^{1-n} U^{-2} + U F' u^2 ) dr
// (the gradient term rewritten through y2 = r^{n-1} U^2 u').
inline double yamabe_bulk_from_ode(const BackgroundMetric& m, const ConformalOde& ode,
                                   double rho) {
  const RadialGrid& g = *m.grid;
  const int n = g.n;
  auto f = [&](double r, double u, double y2) {
    const double Uv = m.U(r);
    return y2 * y2 * std::pow(r, 1.0 - n) / (Uv * Uv) + Uv * m.flux.deriv(r) * u * u;
  };
  double I = 0.0;
  for (std::size_t j = ode.j0; j + 1 < g.size(); ++j) {
    const double ra = g.nodes[j], rb = g.nodes[j + 1];
    const double rm = std::exp(0.5 * (g.lognodes[j] + g.lognodes[j + 1]));
    const double hh = g.lognodes[j + 1] - g.lognodes[j];
    I += hh / 6.0 *
         (f(ra, ode.u[j], ode.y2[j]) * ra + 4.0 * f(rm, ode.umid[j], ode.y2mid[j]) * rm +
          f(rb, ode.u[j + 1], ode.y2[j + 1]) * rb);
  }
  if (g.nodes[ode.j0] > rho) {  // short partial panel below the first node
    const double ra = rho, rb = g.nodes[ode.j0];
    I += 0.5 * (std::log(rb) - std::log(ra)) *
         (f(rb, ode.u[ode.j0], ode.y2[ode.j0]) * rb + f(rb, ode.u[ode.j0], ode.y2[ode.j0]) * ra);
  }
  I += ode.y2.back() * ode.y2.back() * resistance_tail(m.U);
  return n * unit_ball_volume(n) * conformal_dimension_constant(n) * I;
}

inline double ode_tail_coeff(const ConformalOde& ode, int n) {
  // u(r) = u_inf - y2_inf int_r^inf s^{1-n} U^{-2} ds, U -> 1
  return -ode.y2.back() / (n - 2.0);
}

inline double el_residual(const BackgroundMetric& m, const ConformalOde& ode) {
  const RadialGrid& g = *m.grid;
  double worst = 0.0, scale = 0.0;
  for (std::size_t j = ode.j0; j < g.size(); ++j) scale = std::max(scale, std::fabs(ode.y2[j]));
  for (std::size_t j = std::max<std::size_t>(ode.j0, 1); j + 1 < g.size(); ++j) {
    if (j <= ode.j0) continue;
    const double r = g.nodes[j];
    const double dy2 = (ode.y2[j + 1] - ode.y2[j - 1]) / (2.0 * g.h);
    const double expect = r * m.U(r) * m.flux.deriv(r) * ode.u[j];
    worst = std::max(worst, std::fabs(dy2 - expect));
  }
  return worst / std::max(scale, 1e-30);
}

// functional value  n omega_n a_n [ int ( u'^2 U^2 r^{n-1} + U F' u^2 ) dr + tail ]
inline double yamabe_bulk(const BackgroundMetric& m, const RadialProfile& u, double rho) {
  const RadialGrid& g = *m.grid;
  const int n = g.n;
  auto integrand = [&](double r) {
    const double Uv = m.U(r);
    const double up = u.deriv(r);
    const double Fp = m.flux.deriv(r);
    return up * up * Uv * Uv * std::pow(r, n - 1.0) + Uv * Fp * u(r) * u(r);
  };
  std::size_t j0 = g.interval(rho);
  if (g.nodes[j0] < rho) ++j0;
  double I = simpson_partial(rho, g.nodes[j0], integrand) +
             simpson_log(g, j0, g.size() - 1, integrand);
  // gradient tail with y2 frozen: u'^2 U^2 r^{n-1} = y2^2 r^{1-n} U^{-2}
  const double y2inf = u.deriv(g.r_out()) * std::pow(g.r_out(), n - 1.0) *
                       m.U(g.r_out()) * m.U(g.r_out());
  I += y2inf * y2inf * resistance_tail(m.U);
  return n * unit_ball_volume(n) * conformal_dimension_constant(n) * I;
}

}  // namespace detail

// Test hook and building block: the Yamabe energy of a given trial function,
// optionally with the mean-curvature boundary term  2 int_Sigma H u^2 dsigma.
inline double yamabe_functional(const BackgroundMetric& m, double rho, const RadialProfile& u,
                                bool include_boundary_term) {
  double val = detail::yamabe_bulk(m, u, rho);
  if (include_boundary_term) {
    const double H = boundary_mean_curvature(m, rho);
    val += 2.0 * H * u(rho) * u(rho) * sphere_area(m.U, rho);
  }
  return val;
}

// Dirichlet functional Y_D: minimizer solves the conformal-Laplacian problem
// with u(rho) = 0, u -> 1.  The equation is linear, so a single integration
// rescaled to the asymptotic value replaces slope bisection.
inline YamabeResult yamabe_dirichlet(const BackgroundMetric& m, double rho) {
  const auto ode0 = detail::integrate_conformal_ode(m, rho, 0.0, 1.0);
  if (!(ode0.u_infinity > 0.0) || !std::isfinite(ode0.u_infinity))
    throw numeric_error("yamabe_dirichlet: shooting divergence");
  detail::ConformalOde ode = ode0;
  for (auto& x : ode.u) x /= ode0.u_infinity;
  for (auto& x : ode.y2) x /= ode0.u_infinity;
  for (auto& x : ode.umid) x /= ode0.u_infinity;
  for (auto& x : ode.y2mid) x /= ode0.u_infinity;
  ode.u_infinity = 1.0;
  for (std::size_t j = ode.j0; j < ode.u.size(); ++j)
    if (ode.u[j] < -1e-12) throw numeric_error("yamabe_dirichlet: minimizer not positive");

  YamabeResult out;
  out.boundary_condition = YamabeResult::Bc::dirichlet;
  out.minimizer = detail::ode_profile(m, ode, detail::ode_tail_coeff(ode, m.n), 0.0);
  out.residual = detail::el_residual(m, ode);
  out.value = detail::yamabe_bulk_from_ode(m, ode, rho);
  return out;
}

// Robin functional Y_N with natural boundary condition a_n du/dnu = 2 H u; for
// a minimal boundary this is the Neumann problem and u == 1 solves it.
inline YamabeResult yamabe_neumann(const BackgroundMetric& m, double rho) {
  const int n = m.n;
  const double H = boundary_mean_curvature(m, rho);
  const double du0 = 2.0 * H * std::pow(m.U(rho), 2.0 / (n - 2)) / conformal_dimension_constant(n);
  const auto ode0 = detail::integrate_conformal_ode(m, rho, 1.0, du0);
  if (!(ode0.u_infinity > 0.0) || !std::isfinite(ode0.u_infinity))
    throw numeric_error("yamabe_neumann: shooting divergence");
  detail::ConformalOde ode = ode0;
  for (auto& x : ode.u) x /= ode0.u_infinity;
  for (auto& x : ode.y2) x /= ode0.u_infinity;
  for (auto& x : ode.umid) x /= ode0.u_infinity;
  for (auto& x : ode.y2mid) x /= ode0.u_infinity;
  ode.u_infinity = 1.0;
  for (std::size_t j = ode.j0; j < ode.u.size(); ++j)
    if (ode.u[j] <= 0.0) throw numeric_error("yamabe_neumann: minimizer not positive");

  YamabeResult out;
  out.boundary_condition = YamabeResult::Bc::neumann_robin;
  out.minimizer =
      detail::ode_profile(m, ode, detail::ode_tail_coeff(ode, m.n), 1.0 / ode0.u_infinity);
  out.residual = detail::el_residual(m, ode);
  out.value = detail::yamabe_bulk_from_ode(m, ode, rho) +
              2.0 * H * out.minimizer(rho) * out.minimizer(rho) * sphere_area(m.U, rho);
  return out;
}

struct MassYamabe {
  double residual = 0.0;            // m - (Y_N + Y_D)/(4 n (n-1) omega_n)
  double Y_N = 0.0, Y_D = 0.0;
  double mass_drop_residual = 0.0;  // |(m - m(ghat)) - Y_N/(2 n (n-1) omega_n)|
};

inline MassYamabe mass_yamabe_check(const BackgroundMetric& m, double rho) {
  const int n = m.n;
  const YamabeResult yn = yamabe_neumann(m, rho);
  const YamabeResult yd = yamabe_dirichlet(m, rho);
  const double mass = adm_mass(m);
  MassYamabe out;
  out.Y_N = yn.value;
  out.Y_D = yd.value;
  const double norm = 4.0 * n * (n - 1) * unit_ball_volume(n);
  out.residual = mass - (yn.value + yd.value) / norm;
  // mass drop under ghat = u_N^{4/(n-2)} g, from the tail of u_N * U
  const RadialProfile hat = multiply(yn.minimizer, m.U);
  const double m_hat = 2.0 * fit_tail(hat, 1.0, rho).coeff;
  out.mass_drop_residual = std::fabs((mass - m_hat) - yn.value / (0.5 * norm));
  return out;
}

// Penrose gap m - (1/2) (A(rho0)/(n omega_n))^{(n-2)/(n-1)}.  Requires the
// boundary to be minimal and outer-minimizing among spheres.
inline double penrose_gap(const BackgroundMetric& m) {
  // minimality certified to interpolation accuracy (tabulated inputs carry
  // table-resolution wiggle); the gap itself is second-order insensitive to
  // a boundary offset at a near-minimal sphere
  const double H = boundary_mean_curvature(m, m.rho0);
  const double hscale = (m.n - 1.0) / m.rho0;
  if (std::fabs(H) > 1e-4 * hscale)
    throw config_error("penrose_gap: boundary is not minimal");
  const double viol = verify_outer_minimizing(m.U, m.rho0, 2048);
  if (viol < -1e-7 * sphere_area(m.U, m.rho0))
    throw config_error("penrose_gap: boundary is not outer-minimizing");
  return adm_mass(m) - horizon_mass_relation(sphere_area(m.U, m.rho0), m.n);
}

}  // namespace confflow
