#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "confflow/errors.hpp"

namespace confflow {

// Volume of the unit Euclidean n-ball, by the closed-form recurrence
// V_n = 2*pi/n * V_{n-2}.  n*omega_n is then the area of S^{n-1}.
inline double unit_ball_volume(int n) {
  if (n < 1) throw config_error("unit_ball_volume: dimension must be >= 1");
  double v1 = 2.0;              // V_1
  double v2 = M_PI;             // V_2
  if (n == 1) return v1;
  if (n == 2) return v2;
  double v = (n % 2 == 1) ? v1 : v2;
  for (int k = (n % 2 == 1) ? 3 : 4; k <= n; k += 2) v *= 2.0 * M_PI / k;
  return v;
}

// Log-spaced radial grid on [r_min, r_out].  Nodes are r_j = exp(x0 + j*h),
// strictly increasing; h is uniform in log radius.
struct RadialGrid {
  int n = 3;                    // ambient dimension
  std::vector<double> nodes;    // radii, strictly increasing
  std::vector<double> lognodes; // ln r_j, uniform spacing
  double h = 0.0;               // log spacing

  double r_min() const { return nodes.front(); }
  double r_out() const { return nodes.back(); }
  std::size_t size() const { return nodes.size(); }

  // Index of the last node with r_j <= r (clamped to [0, size-2] so that
  // [idx, idx+1] is always a valid interval).
  std::size_t interval(double r) const {
    double x = std::log(r);
    double u = (x - lognodes.front()) / h;
    if (u <= 0.0) return 0;
    std::size_t i = static_cast<std::size_t>(u);
    if (i > size() - 2) i = size() - 2;
    // guard against rounding at node boundaries
    while (i > 0 && r < nodes[i]) --i;
    while (i + 2 < size() && r >= nodes[i + 1]) ++i;
    return i;
  }
};

struct GridSpec {
  std::size_t points = 4096;
  double r_out_mult = 1e6;   // r_out = mult * rho0
  double r_min_frac = 0.5;   // r_min = frac * rho0
};

// Builds the standard grid anchored so that rho0 is exactly a node.
inline RadialGrid make_log_grid(int n, double rho0, const GridSpec& spec = {}) {
  if (n < 3) throw config_error("grid: dimension must be >= 3");
  if (rho0 <= 0.0) throw config_error("grid: rho0 must be positive");
  if (spec.points < 16) throw config_error("grid: need at least 16 nodes");
  if (spec.r_min_frac <= 0.0 || spec.r_min_frac > 1.0 || spec.r_out_mult < 10.0)
    throw config_error("grid: invalid r_min_frac/r_out_mult");
  const std::size_t N = spec.points;
  const double span = std::log(spec.r_out_mult / spec.r_min_frac);
  const double h = span / static_cast<double>(N - 1);
  const auto j0 = static_cast<std::ptrdiff_t>(std::llround(std::log(1.0 / spec.r_min_frac) / h));
  RadialGrid g;
  g.n = n;
  g.h = h;
  g.nodes.resize(N);
  g.lognodes.resize(N);
  const double x0 = std::log(rho0);
  for (std::size_t j = 0; j < N; ++j) {
    g.lognodes[j] = x0 + (static_cast<std::ptrdiff_t>(j) - j0) * h;
    g.nodes[j] = std::exp(g.lognodes[j]);
  }
  g.nodes[static_cast<std::size_t>(j0)] = rho0;  // exact anchor
  g.lognodes[static_cast<std::size_t>(j0)] = x0;
  return g;
}

}  // namespace confflow
