#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "confflow/errors.hpp"
#include "confflow/quadrature.hpp"
#include "confflow/radial_profile.hpp"

namespace confflow {

// For g = phi^{4/(n-2)} delta the g-harmonic radial functions satisfy
// (r^{n-1} phi^2 w')' = 0, so every exterior Dirichlet problem reduces to the
// resistance integral I(rho) = int_rho^inf s^{1-n} phi(s)^{-2} ds.

struct Quadrature {
  double value = 0.0;
  double error = 0.0;  // estimate from resolution halving
};

namespace detail {

inline double resistance_tail(const RadialProfile& phi) {
  const RadialGrid& g = phi.grid();
  const int n = g.n;
  const double pinf = phi.tail().value;
  if (pinf <= 0.0) throw numeric_error("resistance: nonpositive asymptotic factor");
  const double R = g.r_out();
  const double c = phi.tail().coeff / pinf;
  // int_R^inf s^{1-n} phi^-2 = pinf^-2/(n-2) [ R^{2-n} - c R^{2(2-n)} ] + O(R^{3(2-n)})
  return std::pow(pinf, -2.0) / (n - 2.0) *
         (std::pow(R, 2.0 - n) - c * std::pow(R, 2.0 * (2.0 - n)));
}

inline std::function<double(double)> resistance_integrand(const RadialProfile& phi) {
  const int n = phi.grid().n;
  return [&phi, n](double r) {
    const double p = phi(r);
    if (p <= 0.0) throw numeric_error("resistance: nonpositive conformal factor");
    return std::pow(r, 1.0 - n) / (p * p);
  };
}

}  // namespace detail

// Suffix resistance integrals I_j = int_{r_j}^inf at every node, one pass.
inline std::vector<double> resistance_suffix(const RadialProfile& phi) {
  const RadialGrid& g = phi.grid();
  const std::size_t N = g.size();
  auto f = detail::resistance_integrand(phi);
  std::vector<double> I(N);
  I[N - 1] = detail::resistance_tail(phi);
  for (std::size_t j = N - 1; j-- > 0;) {
    const double ra = g.nodes[j], rb = g.nodes[j + 1];
    const double rm = std::sqrt(ra * rb);
    const double hh = g.lognodes[j + 1] - g.lognodes[j];
    I[j] = I[j + 1] + hh / 6.0 * (f(ra) * ra + 4.0 * f(rm) * rm + f(rb) * rb);
  }
  return I;
}

// I(rho) = int_rho^inf s^{1-n} phi^{-2} ds with an error estimate.
inline Quadrature resistance_integral(const RadialProfile& phi, double rho) {
  const RadialGrid& g = phi.grid();
  if (rho > g.r_out()) throw config_error("resistance_integral: rho beyond r_out");
  if (rho < g.r_min()) throw config_error("resistance_integral: rho below grid");
  auto f = detail::resistance_integrand(phi);
  std::size_t j0 = g.interval(rho);
  if (g.nodes[j0] < rho) ++j0;
  Quadrature out;
  const double partial = simpson_partial(rho, g.nodes[j0], f);
  out.value = partial + simpson_log(g, j0, g.size() - 1, f) + detail::resistance_tail(phi);
  const double coarse =
      partial + simpson_log_coarse(g, j0, g.size() - 1, f) + detail::resistance_tail(phi);
  out.error = std::fabs(out.value - coarse) / 15.0;
  return out;
}

// Capacity of the sphere r = rho in phi^{4/(n-2)} delta:
//   c = [(n-2) I(rho)]^{-1},
// cross-checked against the normalized Dirichlet energy of the unit potential
// evaluated with an independent quadrature rule.
inline double capacity(const RadialProfile& phi, double rho, double dual_tol = 1e-6) {
  const RadialGrid& g = phi.grid();
  const int n = g.n;
  const Quadrature I = resistance_integral(phi, rho);
  const double c1 = 1.0 / ((n - 2.0) * I.value);
  if (dual_tol > 0.0) {
    auto f = detail::resistance_integrand(phi);
    std::size_t j0 = g.interval(rho);
    if (g.nodes[j0] < rho) ++j0;
    const double G = simpson_partial(rho, g.nodes[j0], f) + gauss2_log(g, j0, g.size() - 1, f) +
                     detail::resistance_tail(phi);
    // energy route: (1/(n(n-2) omega_n)) int |grad w|^2 dmu = G / ((n-2) I^2)
    const double c2 = G / ((n - 2.0) * I.value * I.value);
    if (std::fabs(c2 - c1) > dual_tol * std::fabs(c1))
      throw numeric_error("capacity: quadrature and Dirichlet-energy routes disagree");
  }
  return c1;
}

// g-harmonic solution on [rho, inf) with w(rho) = boundary_value and
// w -> asymptote, extended by its boundary value inside rho.
struct HarmonicSolution {
  RadialProfile profile;
  double boundary_radius = 0.0;
  double boundary_value = 0.0;
  double asymptote = 0.0;
  double quadrature_constant = 0.0;  // C in w'(r) = C r^{1-n} phi^{-2}
  double capacity_coeff = 0.0;       // coefficient of r^{2-n} at infinity
};

inline HarmonicSolution potential(const RadialProfile& phi, double rho, double boundary_value,
                                  double asymptote) {
  const RadialGrid& g = phi.grid();
  const int n = g.n;
  if (rho > g.r_out() || rho < g.r_min())
    throw config_error("potential: boundary radius outside grid");
  const double a = boundary_value, b = asymptote;

  const double Irho = resistance_integral(phi, rho).value;
  const double C = (b - a) / Irho;
  const std::vector<double> I = resistance_suffix(phi);

  const double wlo = std::min(a, b), whi = std::max(a, b);
  std::vector<double> w(g.size()), dw(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = g.nodes[j];
    if (r < rho) {
      w[j] = a;
      dw[j] = 0.0;
    } else {
      w[j] = std::clamp(b - C * I[j], wlo, whi);  // maximum principle, exact
      const double p = phi(r);
      dw[j] = C * std::pow(r, 2.0 - n) / (p * p);  // r w'(r)
    }
  }
  const double pinf = phi.tail().value;
  const double coeff = (a - b) / ((n - 2.0) * Irho * pinf * pinf);
  HarmonicSolution out;
  out.profile = RadialProfile(phi.grid_ptr(), std::move(w), std::move(dw),
                              TailModel{b, coeff, static_cast<double>(n - 2)},
                              /*apply_limiter=*/false);
  out.boundary_radius = rho;
  out.boundary_value = a;
  out.asymptote = b;
  out.quadrature_constant = C;
  out.capacity_coeff = coeff;
  return out;
}

}  // namespace confflow
