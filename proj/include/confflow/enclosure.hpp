#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "confflow/errors.hpp"
#include "confflow/geometry.hpp"

namespace confflow {

// Radial form of the area functional: A(rho) with total conformal factor phi.
inline double area_functional(const RadialProfile& phi_total, double rho) {
  return sphere_area(phi_total, rho);
}

struct Enclosure {
  double rho = 0.0;
  double area = 0.0;
  std::size_t scan_samples = 0;       // outermost witness: scan resolution
  double tie_tol = 0.0;               // and tie tolerance used
  double minimality_residual = 0.0;   // |H| at rho in the flow metric
};

namespace detail {

// Golden-section minimization in log radius; returns the bracket midpoint.
inline double golden_min(const std::function<double(double)>& A, double xlo, double xhi,
                         double xtol) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = xhi - gr * (xhi - xlo);
  double d = xlo + gr * (xhi - xlo);
  double fc = A(std::exp(c)), fd = A(std::exp(d));
  while (xhi - xlo > xtol) {
    if (fc < fd) {
      xhi = d;
      d = c;
      fd = fc;
      c = xhi - gr * (xhi - xlo);
      fc = A(std::exp(c));
    } else {
      xlo = c;
      c = d;
      fc = fd;
      d = xlo + gr * (xhi - xlo);
      fd = A(std::exp(d));
    }
  }
  return 0.5 * (xlo + xhi);
}

}  // namespace detail

// Outermost minimizer of A over centered spheres in [rho_lower, rho_hi]:
// the largest rho with A(rho) <= min A + tie_tol.  Coarse scan, golden-section
// refinement of every near-minimal basin, rightmost selection, then a
// bisected walk to the right edge of the tie region (flat basins resolve to
// their right endpoint; strict minima pick up the outward tie tolerance).
inline Enclosure outermost_min_enclosure(const RadialProfile& phi_total, double rho_lower,
                                         double rho_hi = 0.0, std::size_t samples = 2048) {
  const RadialGrid& g = phi_total.grid();
  if (rho_hi <= 0.0) rho_hi = g.r_out();
  rho_hi = std::min(rho_hi, g.r_out());
  if (rho_lower < g.r_min() || rho_lower > rho_hi)
    throw config_error("outermost_min_enclosure: search interval invalid");
  auto A = [&](double r) { return area_functional(phi_total, r); };

  const double tie_tol = 1e-10 * A(rho_lower);
  const double xlo = std::log(rho_lower), xhi = std::log(rho_hi);
  if (xhi - xlo < 1e-14) {
    return Enclosure{rho_lower, A(rho_lower), samples, tie_tol,
                     std::fabs(mean_curvature(phi_total, rho_lower))};
  }
  const std::size_t m = std::max<std::size_t>(samples, 16);
  const double dx = (xhi - xlo) / static_cast<double>(m - 1);
  std::vector<double> Av(m);
  double Amin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    Av[i] = A(std::exp(xlo + dx * i));
    Amin = std::min(Amin, Av[i]);
  }

  // refine every near-minimal basin
  struct Cand {
    double x, a;
  };
  std::vector<Cand> cands;
  const double xtol = std::max(1e-12, 1e-10 * std::fabs(xhi - xlo + 1.0));
  std::size_t i = 0;
  while (i < m) {
    if (Av[i] <= Amin + tie_tol) {
      std::size_t jgend = i;
      while (jgend + 1 < m && Av[jgend + 1] <= Amin + tie_tol) ++jgend;
      const std::size_t bl = (i == 0) ? 0 : i - 1;
      const std::size_t br = std::min(jgend + 1, m - 1);
      double xc;
      if (bl == br) {
        xc = xlo + dx * bl;
      } else {
        xc = detail::golden_min(A, xlo + dx * bl, xlo + dx * br, xtol);
      }
      // constrained minimum can sit at the left endpoint
      if (i == 0 && A(rho_lower) <= A(std::exp(xc))) xc = xlo;
      cands.push_back({xc, A(std::exp(xc))});
      i = jgend + 1;
    } else {
      ++i;
    }
  }
  double Abest = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) Abest = std::min(Abest, c.a);
  double xstar = xlo;
  for (const auto& c : cands)
    if (c.a <= Abest + tie_tol) xstar = std::max(xstar, c.x);

  // walk to the right edge of the tie region
  double lo = xstar, hi = xhi;
  if (A(std::exp(hi)) <= Abest + tie_tol) {
    lo = hi;  // tie extends to the window edge
  } else {
    // first scan sample strictly above the tie bounds the walk
    double cap = xhi;
    for (std::size_t k = 0; k < m; ++k) {
      const double xk = xlo + dx * k;
      if (xk > xstar && Av[k] > Abest + tie_tol) {
        cap = xk;
        break;
      }
    }
    hi = cap;
    for (int it = 0; it < 100 && hi - lo > xtol; ++it) {
      const double mid = 0.5 * (lo + hi);
      (A(std::exp(mid)) <= Abest + tie_tol ? lo : hi) = mid;
    }
  }
  xstar = lo;

  if (xstar >= xhi - 2.0 * xtol && rho_hi < g.r_out() * (1.0 - 1e-12))
    throw numeric_error("outermost_min_enclosure: minimizer at search window edge");
  if (xstar >= xhi - 2.0 * xtol && rho_hi >= g.r_out() * (1.0 - 1e-12))
    throw numeric_error("outermost_min_enclosure: minimizer at r_out (grid too small)");

  Enclosure out;
  out.rho = std::exp(xstar);
  out.area = A(out.rho);
  out.scan_samples = m;
  out.tie_tol = tie_tol;
  out.minimality_residual = std::fabs(mean_curvature(phi_total, out.rho));
  return out;
}

// min over rho' >= rho of A(rho') - A(rho); nonnegative (within ties)
// certifies that the sphere at rho is outer-minimizing among spheres.
inline double verify_outer_minimizing(const RadialProfile& phi_total, double rho,
                                      std::size_t samples = 2048) {
  const RadialGrid& g = phi_total.grid();
  if (rho < g.r_min() || rho > g.r_out())
    throw config_error("verify_outer_minimizing: rho outside grid");
  auto A = [&](double r) { return area_functional(phi_total, r); };
  const double xlo = std::log(rho), xhi = std::log(g.r_out());
  if (xhi - xlo < 1e-14) return 0.0;
  const std::size_t m = std::max<std::size_t>(samples, 16);
  const double dx = (xhi - xlo) / static_cast<double>(m - 1);
  double best = std::numeric_limits<double>::infinity();
  std::size_t ibest = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = A(std::exp(xlo + dx * i));
    if (a < best) {
      best = a;
      ibest = i;
    }
  }
  const double bl = xlo + dx * (ibest > 0 ? ibest - 1 : 0);
  const double br = xlo + dx * std::min(ibest + 1, m - 1);
  if (br > bl) {
    const double xc = detail::golden_min(A, bl, br, std::max(1e-12, 1e-10 * (xhi - xlo)));
    best = std::min(best, A(std::exp(xc)));
  }
  return best - A(rho);
}

}  // namespace confflow
