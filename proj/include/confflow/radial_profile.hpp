#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "confflow/errors.hpp"
#include "confflow/radial_grid.hpp"

namespace confflow {

// Asymptotic model beyond r_out: f(r) ~ value + coeff * r^{2-n}, with the
// remainder decaying like r^{2-n-order}.
struct TailModel {
  double value = 0.0;
  double coeff = 0.0;
  double order = 0.0;
};

// Scalar function of radius on a shared log grid.  Interpolation is cubic
// Hermite in log radius with Fritsch-Carlson limited slopes, so monotone data
// interpolates monotonically.  Node slopes default to centered differences on
// the log grid (one-sided at the ends); callers that know the derivative
// analytically can pass log-slopes d/d(ln r) directly.
class RadialProfile {
 public:
  RadialProfile() = default;

  RadialProfile(std::shared_ptr<const RadialGrid> grid, std::vector<double> values,
                TailModel tail)
      : grid_(std::move(grid)), values_(std::move(values)), tail_(tail) {
    check_sizes();
    slopes_ = centered_slopes(*grid_, values_);
    limit_slopes();
  }

  // apply_limiter=false keeps the given slopes verbatim; used for solutions
  // with a one-sided kink at their boundary sphere, where the analytic
  // exterior slope is exact and the limiter would flatten it.
  RadialProfile(std::shared_ptr<const RadialGrid> grid, std::vector<double> values,
                std::vector<double> logslopes, TailModel tail, bool apply_limiter = true)
      : grid_(std::move(grid)),
        values_(std::move(values)),
        slopes_(std::move(logslopes)),
        tail_(tail) {
    check_sizes();
    if (slopes_.size() != values_.size())
      throw config_error("profile: slope/value size mismatch");
    if (apply_limiter) limit_slopes();
  }

  const RadialGrid& grid() const { return *grid_; }
  std::shared_ptr<const RadialGrid> grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& logslopes() const { return slopes_; }
  const TailModel& tail() const { return tail_; }

  // Value at radius r.  Below r_min the profile is frozen at its first node;
  // beyond r_out the tail model applies.
  double operator()(double r) const {
    const auto& g = *grid_;
    if (r >= g.r_out()) return tail_eval(r);
    if (r <= g.r_min()) return values_.front();
    std::size_t i = g.interval(r);
    double t, hh;
    hermite_coords(r, i, t, hh);
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * values_[i] + (t3 - 2 * t2 + t) * hh * slopes_[i] +
           (-2 * t3 + 3 * t2) * values_[i + 1] + (t3 - t2) * hh * slopes_[i + 1];
  }

  // d/dr at radius r, taken from the interval to the right of r (one-sided
  // from the exterior at kinks and nodes).
  double deriv(double r) const {
    const auto& g = *grid_;
    if (r >= g.r_out()) return tail_deriv(r);
    if (r < g.r_min()) return 0.0;
    std::size_t i = g.interval(r);
    double t, hh;
    hermite_coords(r, i, t, hh);
    const double t2 = t * t;
    double dydx = ((6 * t2 - 6 * t) * values_[i] + (3 * t2 - 4 * t + 1) * hh * slopes_[i] +
                   (-6 * t2 + 6 * t) * values_[i + 1] + (3 * t2 - 2 * t) * hh * slopes_[i + 1]) /
                  hh;
    return dydx / r;
  }

  // d/d(ln r), same convention.
  double logderiv(double r) const { return deriv(r) * r; }

  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

  static std::vector<double> centered_slopes(const RadialGrid& g, const std::vector<double>& y) {
    const std::size_t N = y.size();
    std::vector<double> d(N);
    const double h = g.h;
    for (std::size_t i = 1; i + 1 < N; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2 * h);
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h);
    d[N - 1] = (3 * y[N - 1] - 4 * y[N - 2] + y[N - 3]) / (2 * h);
    return d;
  }

 private:
  void check_sizes() const {
    if (!grid_ || values_.size() != grid_->size())
      throw config_error("profile: value/grid size mismatch");
    for (double v : values_)
      if (!std::isfinite(v)) throw numeric_error("profile: non-finite value");
  }

  void hermite_coords(double r, std::size_t i, double& t, double& hh) const {
    const auto& g = *grid_;
    hh = g.lognodes[i + 1] - g.lognodes[i];
    t = (std::log(r) - g.lognodes[i]) / hh;
    t = std::clamp(t, 0.0, 1.0);
  }

  double tail_eval(double r) const {
    return tail_.value + tail_.coeff * std::pow(r, 2.0 - grid_->n);
  }
  double tail_deriv(double r) const {
    return tail_.coeff * (2.0 - grid_->n) * std::pow(r, 1.0 - grid_->n);
  }

  // Fritsch-Carlson style limiter: zero slope at interior extrema of the data,
  // |d| <= 3 |secant| elsewhere.  Leaves consistent smooth slopes untouched.
  void limit_slopes() {
    const std::size_t N = values_.size();
    const double h = grid_->h;
    auto sec = [&](std::size_t i) { return (values_[i + 1] - values_[i]) / h; };
    for (std::size_t i = 0; i < N; ++i) {
      const bool has_l = i > 0, has_r = i + 1 < N;
      const double sl = has_l ? sec(i - 1) : 0.0;
      const double sr = has_r ? sec(i) : 0.0;
      if (has_l && has_r) {
        if (sl * sr <= 0.0) {
          slopes_[i] = 0.0;
          continue;
        }
        const double lim = 3.0 * std::min(std::fabs(sl), std::fabs(sr));
        if (slopes_[i] * sl < 0.0)
          slopes_[i] = 0.0;
        else if (std::fabs(slopes_[i]) > lim)
          slopes_[i] = std::copysign(lim, sl);
      } else {
        const double s = has_r ? sr : sl;
        if (slopes_[i] * s < 0.0)
          slopes_[i] = 0.0;
        else if (std::fabs(slopes_[i]) > 3.0 * std::fabs(s))
          slopes_[i] = std::copysign(3.0 * std::fabs(s), s);
      }
    }
  }

  std::shared_ptr<const RadialGrid> grid_;
  std::vector<double> values_;
  std::vector<double> slopes_;  // d/d(ln r) at nodes
  TailModel tail_;
};

inline RadialProfile constant_profile(std::shared_ptr<const RadialGrid> grid, double c) {
  std::vector<double> v(grid->size(), c), s(grid->size(), 0.0);
  return RadialProfile(std::move(grid), std::move(v), std::move(s), TailModel{c, 0.0, 0.0});
}

// Pointwise product; tails multiplied to first order in r^{2-n}.
inline RadialProfile multiply(const RadialProfile& a, const RadialProfile& b) {
  const std::size_t N = a.values().size();
  if (N != b.values().size()) throw config_error("multiply: size mismatch");
  std::vector<double> v(N), d(N);
  for (std::size_t i = 0; i < N; ++i) {
    v[i] = a.values()[i] * b.values()[i];
    d[i] = a.logslopes()[i] * b.values()[i] + a.values()[i] * b.logslopes()[i];
  }
  TailModel t;
  t.value = a.tail().value * b.tail().value;
  t.coeff = a.tail().value * b.tail().coeff + b.tail().value * a.tail().coeff;
  t.order = static_cast<double>(a.grid().n - 2);
  return RadialProfile(a.grid_ptr(), std::move(v), std::move(d), t);
}

// a + s*b, pointwise with tail bookkeeping.
inline RadialProfile axpy(const RadialProfile& a, double s, const RadialProfile& b) {
  const std::size_t N = a.values().size();
  if (N != b.values().size()) throw config_error("axpy: size mismatch");
  std::vector<double> v(N), d(N);
  for (std::size_t i = 0; i < N; ++i) {
    v[i] = a.values()[i] + s * b.values()[i];
    d[i] = a.logslopes()[i] + s * b.logslopes()[i];
  }
  TailModel t;
  t.value = a.tail().value + s * b.tail().value;
  t.coeff = a.tail().coeff + s * b.tail().coeff;
  t.order = std::min(a.tail().order, b.tail().order);
  return RadialProfile(a.grid_ptr(), std::move(v), std::move(d), t);
}

struct TailFit {
  double coeff = 0.0;       // fitted coefficient of r^{2-n}
  double next_coeff = 0.0;  // fitted coefficient of r^{2(2-n)}
  double order = 0.0;       // estimated decay exponent of the remainder
  double residual = 0.0;    // rms of the fit residual in r^{n-2}(f - value)
};

// Least squares of r^{n-2} (f - tail_value) over the outermost usable decade
// of the grid against the basis {1, r^{2-n}}.  The second basis member
// absorbs the first correction so the leading coefficient is unbiased; the
// remainder exponent is reported from the residuals, not assumed.  For steep
// decays the far field of f - tail_value underflows against tail_value, so
// the window is pulled inward until the deviation carries signal.
inline TailFit fit_tail(const RadialProfile& f, double tail_value, double r_safe = 0.0) {
  const RadialGrid& g = f.grid();
  const int n = g.n;
  std::size_t jtop = g.size() - 1;
  const double sig_floor = 3e-9;
  // Never walk into the lower fifth of the grid: profiles that coincide with
  // their asymptote to rounding (equality cases) have no signal anywhere.
  // With r_safe set, the decade below the window top also stays outside the
  // given boundary sphere.
  std::size_t jstop = std::max<std::size_t>(16, g.size() / 5);
  if (r_safe > 0.0 && 10.0 * r_safe > g.r_min())
    jstop = std::max(jstop, std::min(g.interval(10.0 * r_safe) + 1, g.size() - 9));
  while (jtop > jstop) {
    const double dev = std::fabs(f.values()[jtop] - tail_value);
    if (dev >= sig_floor * (std::fabs(tail_value) + std::fabs(f.values()[jtop])) && dev > 0.0)
      break;
    --jtop;
  }
  const double r_lo = g.nodes[jtop] / 10.0;
  std::size_t j0 = g.interval(r_lo) + 1;
  if (jtop < j0 + 8) j0 = jtop >= 8 ? jtop - 8 : 0;
  double s00 = 0, s01 = 0, s11 = 0, b0 = 0, b1 = 0;
  for (std::size_t j = j0; j <= jtop; ++j) {
    const double r = g.nodes[j];
    const double z = std::pow(r, n - 2.0) * (f.values()[j] - tail_value);
    const double u = std::pow(r, 2.0 - n);
    s00 += 1.0;
    s01 += u;
    s11 += u * u;
    b0 += z;
    b1 += z * u;
  }
  const double det = s00 * s11 - s01 * s01;
  TailFit out;
  if (std::fabs(det) < 1e-300) throw numeric_error("fit_tail: degenerate fit window");
  out.coeff = (s11 * b0 - s01 * b1) / det;
  out.next_coeff = (s00 * b1 - s01 * b0) / det;
  // residual rms and decay-order estimate
  double rss = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t j = j0; j <= jtop; ++j) {
    const double r = g.nodes[j];
    const double z = std::pow(r, n - 2.0) * (f.values()[j] - tail_value);
    const double res = z - out.coeff - out.next_coeff * std::pow(r, 2.0 - n);
    rss += res * res;
    if (std::fabs(res) > 1e-14 * (std::fabs(out.coeff) + 1e-30)) {
      const double lx = std::log(r), ly = std::log(std::fabs(res));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++m;
    }
  }
  out.residual = std::sqrt(rss / static_cast<double>(jtop - j0 + 1));
  if (m >= 4) {
    const double dm = static_cast<double>(m);
    const double slope = (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
    out.order = -slope;  // remainder ~ r^{-order} relative to the r^{2-n} term
  } else {
    out.order = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace confflow
