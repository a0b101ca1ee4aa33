#pragma once

#include <cmath>

#include "confflow/errors.hpp"
#include "confflow/radial_profile.hpp"

namespace confflow {

inline double conformal_dimension_constant(int n) {  // a_n
  return 4.0 * (n - 1) / (n - 2);
}

enum class Orientation { toward_end, toward_hole };

// Area of the coordinate sphere of radius rho in the metric with total
// conformal factor phi:  A = n omega_n rho^{n-1} phi^{2(n-1)/(n-2)}.
inline double sphere_area(const RadialProfile& phi, double rho) {
  const int n = phi.grid().n;
  if (rho < phi.grid().r_min()) throw config_error("sphere_area: rho below grid");
  const double p = phi(rho);
  if (p <= 0.0) throw numeric_error("sphere_area: nonpositive conformal factor");
  return n * unit_ball_volume(n) * std::pow(rho, n - 1.0) *
         std::pow(p, 2.0 * (n - 1) / (n - 2));
}

// Mean curvature of the sphere r = rho in phi^{4/(n-2)} delta with respect to
// the unit normal pointing to the end;
// H = phi^{-2/(n-2)} [ (n-1)/rho + (2(n-1)/(n-2)) phi'(rho)/phi(rho) ],
// the derivative one-sided from the exterior.  The two orientations are
// exact negatives of each other.
inline double mean_curvature(const RadialProfile& phi, double rho,
                             Orientation orient = Orientation::toward_end) {
  const int n = phi.grid().n;
  const double p = phi(rho);
  if (p <= 0.0) throw numeric_error("mean_curvature: nonpositive conformal factor");
  const double dp = phi.deriv(rho);
  const double h = std::pow(p, -2.0 / (n - 2)) *
                   ((n - 1.0) / rho + 2.0 * (n - 1) / (n - 2) * dp / p);
  return orient == Orientation::toward_end ? h : -h;
}

}  // namespace confflow
