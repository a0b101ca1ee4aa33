#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "confflow/enclosure.hpp"
#include "confflow/errors.hpp"
#include "confflow/geometry.hpp"
#include "confflow/quadrature.hpp"
#include "confflow/radial_grid.hpp"
#include "confflow/radial_profile.hpp"

namespace confflow {

// Rotationally symmetric conformally flat asymptotically flat metric
// g = U^{4/(n-2)} delta, represented by the conformal factor U(r) -> 1 and
// the radial flux F(r) = -r^{n-1} U'(r).  F >= 0 nondecreasing encodes
// nonnegative scalar curvature.
struct BackgroundMetric {
  int n = 3;
  std::shared_ptr<const RadialGrid> grid;
  RadialProfile U;
  RadialProfile flux;
  double rho0 = 1.0;  // initial boundary sphere radius
  double omega_n = 0.0;

  double dU(double r) const { return -flux(r) * std::pow(r, 1.0 - n); }
};

// Mean curvature of the boundary sphere using the metric's exact flux-based
// derivative of U.
inline double boundary_mean_curvature(const BackgroundMetric& m, double rho,
                                      Orientation orient = Orientation::toward_end) {
  const int n = m.n;
  const double p = m.U(rho);
  const double h = std::pow(p, -2.0 / (n - 2)) *
                   ((n - 1.0) / rho + 2.0 * (n - 1) / (n - 2) * m.dU(rho) / p);
  return orient == Orientation::toward_end ? h : -h;
}

// Scalar curvature R(r) = a_n U^{-(n+2)/(n-2)} r^{1-n} F'(r).
inline double scalar_curvature(const BackgroundMetric& m, double r) {
  if (r < m.grid->r_min() || r > m.grid->r_out())
    throw config_error("scalar_curvature: radius outside grid");
  const double dF = m.flux.deriv(r);
  return conformal_dimension_constant(m.n) * std::pow(m.U(r), -(m.n + 2.0) / (m.n - 2)) *
         std::pow(r, 1.0 - m.n) * dF;
}

struct AdmMass {
  double fit = 0.0;        // 2 * tail coefficient from the outer-decade fit
  double flux_route = 0.0; // 2 F(r_out) / (n-2)
};

inline AdmMass adm_mass_routes(const BackgroundMetric& m) {
  AdmMass out;
  out.fit = 2.0 * fit_tail(m.U, 1.0, m.rho0).coeff;
  out.flux_route = 2.0 * m.flux(m.grid->r_out()) / (m.n - 2.0);
  return out;
}

// ADM mass; the tail-fit route is canonical and must agree with the flux
// route to relative 1e-4 (disagreement signals a grid/tail misconfiguration).
inline double adm_mass(const BackgroundMetric& m, double rel_tol = 1e-4) {
  const AdmMass r = adm_mass_routes(m);
  const double scale = std::max(1.0, std::fabs(r.fit));
  if (std::fabs(r.fit - r.flux_route) > rel_tol * scale)
    throw numeric_error("adm_mass: tail-fit and flux routes disagree");
  return r.fit;
}

// mono_slack relaxes the nondecreasing-flux check for resampled (tabulated)
// inputs, whose interpolated flux wiggles at the table resolution; analytic
// recipes validate strictly.
inline void validate_metric(const BackgroundMetric& m, double mono_slack = 1e-10) {
  if (m.n < 3) throw config_error("metric: dimension must be >= 3");
  if (m.rho0 < m.grid->r_min()) throw config_error("metric: rho0 below grid range");
  for (std::size_t j = 0; j < m.grid->size(); ++j) {
    const double scale = 1.0 + std::fabs(m.flux.values()[j]);
    if (m.U.values()[j] <= 0.0) throw numeric_error("metric: U must be positive");
    if (m.flux.values()[j] < -mono_slack * scale)
      throw numeric_error("metric: flux must be nonnegative");
    if (j > 0 && m.flux.values()[j] < m.flux.values()[j - 1] - mono_slack * scale)
      throw numeric_error("metric: flux must be nondecreasing");
  }
  if (std::fabs(m.U.tail().value - 1.0) > 1e-12)
    throw numeric_error("metric: U must tend to 1 at infinity");
}

// ---------------------------------------------------------------------------
// constructors

inline BackgroundMetric make_schwarzschild(int n, double mass, const GridSpec& spec = {}) {
  if (n < 3) throw config_error("make_schwarzschild: dimension must be >= 3");
  if (mass <= 0.0) throw config_error("make_schwarzschild: mass must be positive");
  const double rho0 = std::pow(mass / 2.0, 1.0 / (n - 2));
  auto grid = std::make_shared<const RadialGrid>(make_log_grid(n, rho0, spec));
  const std::size_t N = grid->size();
  std::vector<double> u(N), du(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double r = grid->nodes[j];
    u[j] = 1.0 + mass / 2.0 * std::pow(r, 2.0 - n);
    du[j] = mass / 2.0 * (2.0 - n) * std::pow(r, 2.0 - n);  // d/d ln r
  }
  BackgroundMetric m;
  m.n = n;
  m.grid = grid;
  m.U = RadialProfile(grid, std::move(u), std::move(du),
                      TailModel{1.0, mass / 2.0, static_cast<double>(n - 2)});
  const double f = (n - 2.0) * mass / 2.0;
  m.flux = constant_profile(grid, f);
  m.rho0 = rho0;
  m.omega_n = unit_ball_volume(n);
  validate_metric(m);
  return m;
}

// Nonnegative nondecreasing bounded flux recipe: a smooth ramp in log radius
// from f0 to f1 centered at rc with width w.
struct FluxRamp {
  double f0 = 0.0, f1 = 0.0, rc = 1.0, w = 0.5;

  double value(double r) const {
    if (f1 == f0) return f0;
    return f0 + (f1 - f0) * 0.5 * (1.0 + std::tanh((std::log(r) - std::log(rc)) / w));
  }
  double deriv(double r) const {  // dF/dr
    if (f1 == f0) return 0.0;
    const double s = 1.0 / std::cosh((std::log(r) - std::log(rc)) / w);
    return (f1 - f0) * 0.5 * s * s / (w * r);
  }
};

namespace detail {

// U(r) = 1 + int_r^inf F(s) s^{1-n} ds on the given grid, with exact flux
// evaluations at panel midpoints and the constant-flux analytic tail.
inline RadialProfile conformal_factor_from_flux(std::shared_ptr<const RadialGrid> grid,
                                                const FluxRamp& F) {
  const RadialGrid& g = *grid;
  const int n = g.n;
  const std::size_t N = g.size();
  auto integrand = [&](double r) { return F.value(r) * std::pow(r, 1.0 - n); };
  std::vector<double> suffix(N, 0.0);
  const double tail = F.f1 * std::pow(g.r_out(), 2.0 - n) / (n - 2.0);
  suffix[N - 1] = tail;
  for (std::size_t j = N - 1; j-- > 0;) {
    const double ra = g.nodes[j], rb = g.nodes[j + 1];
    const double rm = std::sqrt(ra * rb);
    const double hh = g.lognodes[j + 1] - g.lognodes[j];
    suffix[j] = suffix[j + 1] +
                hh / 6.0 * (integrand(ra) * ra + 4.0 * integrand(rm) * rm + integrand(rb) * rb);
  }
  std::vector<double> u(N), du(N);
  for (std::size_t j = 0; j < N; ++j) {
    u[j] = 1.0 + suffix[j];
    du[j] = -F.value(g.nodes[j]) * std::pow(g.nodes[j], 2.0 - n);  // r U' = -F r^{2-n}
  }
  return RadialProfile(std::move(grid), std::move(u), std::move(du),
                       TailModel{1.0, F.f1 / (n - 2.0), static_cast<double>(n - 2)});
}

inline RadialProfile flux_profile(std::shared_ptr<const RadialGrid> grid, const FluxRamp& F) {
  const RadialGrid& g = *grid;
  std::vector<double> f(g.size()), df(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    f[j] = F.value(g.nodes[j]);
    df[j] = F.deriv(g.nodes[j]) * g.nodes[j];
  }
  return RadialProfile(std::move(grid), std::move(f), std::move(df), TailModel{F.f1, 0.0, 0.0});
}

// Minimal-sphere equation G(rho) = F(rho) - (n-2) rho^{n-2} U(rho) / 2 = 0.
inline double minimal_sphere_gap(const FluxRamp& F, const RadialProfile& U, int n, double rho) {
  return F.value(rho) - 0.5 * (n - 2.0) * std::pow(rho, n - 2.0) * U(rho);
}

}  // namespace detail

// Builds an admissible metric from a flux recipe.  With solve_minimal set the
// boundary is placed at the outermost root of the minimal-sphere condition
// U'(rho)/U(rho) + (n-2)/(2 rho) = 0 (bisection) and verified to be
// outer-minimizing among spheres; otherwise rho0_explicit is used as-is.
inline BackgroundMetric make_from_flux(int n, const FluxRamp& F, const GridSpec& spec = {},
                                       bool solve_minimal = true,
                                       std::optional<double> rho0_explicit = std::nullopt) {
  if (n < 3) throw config_error("make_from_flux: dimension must be >= 3");
  if (F.f0 < 0.0 || F.f1 < F.f0) throw config_error("make_from_flux: flux must be nonnegative and nondecreasing");
  double rho0;
  if (solve_minimal) {
    // provisional grid anchored at the ramp scale to locate the root; reaches
    // far enough inward that the small-radius sign of the minimality gap is
    // always visible
    GridSpec pspec = spec;
    pspec.r_min_frac = std::min(spec.r_min_frac, 0.02);
    auto pg = std::make_shared<const RadialGrid>(make_log_grid(n, F.rc, pspec));
    RadialProfile Up = detail::conformal_factor_from_flux(pg, F);
    auto G = [&](double r) { return detail::minimal_sphere_gap(F, Up, n, r); };
    const RadialGrid& g = *pg;
    double lo_r = 0, hi_r = 0;
    for (std::size_t j = g.size() - 1; j-- > 0;) {  // outermost sign change
      if (G(g.nodes[j]) > 0.0 && G(g.nodes[j + 1]) <= 0.0) {
        lo_r = g.nodes[j];
        hi_r = g.nodes[j + 1];
        break;
      }
    }
    if (lo_r == 0.0) throw numeric_error("make_from_flux: no minimal sphere in grid range");
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo_r * hi_r);
      (G(mid) > 0.0 ? lo_r : hi_r) = mid;
    }
    rho0 = 0.5 * (lo_r + hi_r);
  } else {
    if (!rho0_explicit) throw config_error("make_from_flux: rho0 required when minimality is not solved");
    rho0 = *rho0_explicit;
  }

  auto grid = std::make_shared<const RadialGrid>(make_log_grid(n, rho0, spec));
  BackgroundMetric m;
  m.n = n;
  m.grid = grid;
  m.U = detail::conformal_factor_from_flux(grid, F);
  m.flux = detail::flux_profile(grid, F);
  m.omega_n = unit_ball_volume(n);
  if (solve_minimal) {
    // refine the root once more on the final grid
    auto G = [&](double r) { return detail::minimal_sphere_gap(F, m.U, n, r); };
    double lo_r = rho0 * 0.9, hi_r = rho0 * 1.1;
    if (G(lo_r) > 0.0 && G(hi_r) <= 0.0) {
      for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo_r * hi_r);
        (G(mid) > 0.0 ? lo_r : hi_r) = mid;
      }
      rho0 = 0.5 * (lo_r + hi_r);
    }
  }
  m.rho0 = rho0;
  validate_metric(m);
  if (solve_minimal) {
    const double viol = verify_outer_minimizing(m.U, m.rho0, 2048);
    if (viol < -1e-9 * sphere_area(m.U, m.rho0))
      throw numeric_error("make_from_flux: boundary is not outer-minimizing among spheres");
  }
  return m;
}

// Tabulated scenario input: two-column text (radius, U), ascending radius,
// '#' comments.  The table is resampled onto a log grid spanning its range.
inline BackgroundMetric make_tabulated(int n, const std::string& path, double rho0,
                                       std::size_t points = 4096) {
  std::ifstream in(path);
  if (!in) throw config_error("tabulated: cannot open " + path);
  std::vector<double> rs, us;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double r, u;
    if (!(ss >> r)) continue;  // blank/comment line
    if (!(ss >> u))
      throw config_error("tabulated: line " + std::to_string(lineno) + ": expected two columns");
    if (!rs.empty() && r <= rs.back())
      throw config_error("tabulated: line " + std::to_string(lineno) + ": radii must ascend");
    rs.push_back(r);
    us.push_back(u);
  }
  if (rs.size() < 16) throw config_error("tabulated: need at least 16 rows");

  // raw monotone interpolant of the table in log radius
  RadialGrid raw;
  raw.n = n;
  raw.nodes = rs;
  raw.lognodes.resize(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) raw.lognodes[i] = std::log(rs[i]);
  raw.h = (raw.lognodes.back() - raw.lognodes.front()) / (rs.size() - 1);
  // table may be unevenly spaced; interpolate piecewise on the raw nodes
  auto table_eval = [&](double r) {
    if (r <= rs.front()) return us.front();
    if (r >= rs.back()) return us.back();
    std::size_t i = 0;
    while (i + 2 < rs.size() && rs[i + 1] <= r) ++i;
    const double t = (std::log(r) - raw.lognodes[i]) / (raw.lognodes[i + 1] - raw.lognodes[i]);
    return (1 - t) * us[i] + t * us[i + 1];
  };

  GridSpec spec;
  spec.points = points;
  spec.r_min_frac = rs.front() / rho0;
  spec.r_out_mult = rs.back() / rho0;
  if (spec.r_min_frac > 1.0) throw config_error("tabulated: rho0 below first tabulated radius");
  auto grid = std::make_shared<const RadialGrid>(make_log_grid(n, rho0, spec));
  std::vector<double> uvals(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j) uvals[j] = table_eval(grid->nodes[j]);
  RadialProfile U(grid, std::move(uvals), TailModel{1.0, 0.0, 0.0});
  const TailFit tf = fit_tail(U, 1.0);
  U = RadialProfile(grid, U.values(), U.logslopes(),
                    TailModel{1.0, tf.coeff, std::max(1.0, tf.order)});

  // flux from the interpolant derivative
  std::vector<double> f(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j) {
    const double r = grid->nodes[j];
    f[j] = -std::pow(r, n - 1.0) * U.deriv(r);
  }
  BackgroundMetric m;
  m.n = n;
  m.grid = grid;
  m.U = std::move(U);
  m.flux = RadialProfile(grid, std::move(f), TailModel{(n - 2.0) * tf.coeff, 0.0, 0.0});
  m.rho0 = rho0;
  m.omega_n = unit_ball_volume(n);
  validate_metric(m, 1e-4);
  return m;
}

}  // namespace confflow
