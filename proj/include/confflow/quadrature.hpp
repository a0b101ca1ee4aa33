#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "confflow/radial_grid.hpp"

namespace confflow {

// Composite Simpson on the log grid, one panel per node interval with the
// integrand sampled at the geometric midpoint.  `f` takes the radius and
// returns the integrand of  integral f(r) dr ; the log-space measure factor
// r is applied here.
inline double simpson_log(const RadialGrid& g, std::size_t j_begin, std::size_t j_end,
                          const std::function<double(double)>& f) {
  double acc = 0.0;
  for (std::size_t j = j_begin; j + 1 <= j_end; ++j) {
    const double ra = g.nodes[j], rb = g.nodes[j + 1];
    const double rm = std::sqrt(ra * rb);
    const double hh = g.lognodes[j + 1] - g.lognodes[j];
    acc += hh / 6.0 * (f(ra) * ra + 4.0 * f(rm) * rm + f(rb) * rb);
  }
  return acc;
}

// Same integral with node-pair panels (no midpoint interpolation); used as an
// independent resolution for error estimates.
inline double simpson_log_coarse(const RadialGrid& g, std::size_t j_begin, std::size_t j_end,
                                 const std::function<double(double)>& f) {
  double acc = 0.0;
  std::size_t j = j_begin;
  for (; j + 2 <= j_end; j += 2) {
    const double hh = g.lognodes[j + 2] - g.lognodes[j];
    acc += hh / 6.0 *
           (f(g.nodes[j]) * g.nodes[j] + 4.0 * f(g.nodes[j + 1]) * g.nodes[j + 1] +
            f(g.nodes[j + 2]) * g.nodes[j + 2]);
  }
  if (j + 1 <= j_end) {  // trapezoid on the odd leftover
    const double hh = g.lognodes[j + 1] - g.lognodes[j];
    acc += hh / 2.0 * (f(g.nodes[j]) * g.nodes[j] + f(g.nodes[j + 1]) * g.nodes[j + 1]);
  }
  return acc;
}

// Two-point Gauss-Legendre per node interval in log space.
inline double gauss2_log(const RadialGrid& g, std::size_t j_begin, std::size_t j_end,
                         const std::function<double(double)>& f) {
  const double c = 0.5 / std::sqrt(3.0);
  double acc = 0.0;
  for (std::size_t j = j_begin; j + 1 <= j_end; ++j) {
    const double xa = g.lognodes[j], xb = g.lognodes[j + 1];
    const double xm = 0.5 * (xa + xb), hw = (xb - xa);
    const double x1 = xm - c * hw, x2 = xm + c * hw;
    const double r1 = std::exp(x1), r2 = std::exp(x2);
    acc += 0.5 * hw * (f(r1) * r1 + f(r2) * r2);
  }
  return acc;
}

// Five-point Simpson over an arbitrary short log interval [ra, rb].
inline double simpson_partial(double ra, double rb, const std::function<double(double)>& f) {
  if (rb <= ra) return 0.0;
  const double xa = std::log(ra), xb = std::log(rb);
  const double hh = (xb - xa) / 4.0;
  double acc = 0.0;
  double w[5] = {1, 4, 2, 4, 1};
  for (int k = 0; k < 5; ++k) {
    const double r = std::exp(xa + k * hh);
    acc += w[k] * f(r) * r;
  }
  return acc * hh / 3.0;
}

}  // namespace confflow
