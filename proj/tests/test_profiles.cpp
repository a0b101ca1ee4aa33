#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "confflow/enclosure.hpp"
#include "confflow/config.hpp"
#include "confflow/profiles.hpp"

using namespace confflow;
using Catch::Approx;

namespace {
const GridSpec kTestGrid{1024, 1e6, 0.5};
const GridSpec kFineGrid{4096, 1e6, 0.5};
}  // namespace

TEST_CASE("unit ball volumes from the recurrence") {
  CHECK(unit_ball_volume(2) == Approx(M_PI).epsilon(1e-14));
  CHECK(unit_ball_volume(3) == Approx(4.0 * M_PI / 3.0).epsilon(1e-14));
  CHECK(unit_ball_volume(4) == Approx(M_PI * M_PI / 2.0).epsilon(1e-14));
  CHECK(unit_ball_volume(5) == Approx(8.0 * M_PI * M_PI / 15.0).epsilon(1e-14));
}

TEST_CASE("schwarzschild construction") {
  const auto m32 = make_schwarzschild(3, 2.0, kTestGrid);
  CHECK(m32.rho0 == Approx(1.0).epsilon(1e-14));
  CHECK(m32.U(1.0) == Approx(2.0).epsilon(1e-14));
  CHECK(m32.U.tail().coeff == Approx(1.0).epsilon(1e-14));

  const auto m42 = make_schwarzschild(4, 2.0, kTestGrid);
  CHECK(m42.rho0 == Approx(1.0).epsilon(1e-14));
  CHECK(m42.U(2.0) == Approx(1.25).epsilon(1e-9));

  // boundary sphere area in g: 4 pi * 1 * 2^4
  CHECK(sphere_area(m32.U, m32.rho0) == Approx(64.0 * M_PI).epsilon(1e-12));

  CHECK_THROWS_AS(make_schwarzschild(3, -1.0), config_error);
  CHECK_THROWS_AS(make_schwarzschild(2, 1.0), config_error);
}

TEST_CASE("adm mass routes") {
  CHECK(adm_mass(make_schwarzschild(3, 2.0, kTestGrid)) == Approx(2.0).epsilon(1e-9));
  CHECK(adm_mass(make_schwarzschild(5, 1.0, kTestGrid)) == Approx(1.0).epsilon(1e-9));

  // flat metric through the flux constructor with an explicit boundary
  const auto flat = make_from_flux(3, FluxRamp{0.0, 0.0, 1.0, 0.5}, kTestGrid, false, 1.0);
  CHECK(std::fabs(adm_mass(flat)) < 1e-12);

  // flux family with F(inf) = c0: mass 2 c0/(n-2)
  const auto f3 = make_from_flux(3, FluxRamp{0.25, 0.65, 2.0, 0.7}, kFineGrid);
  CHECK(adm_mass(f3) == Approx(2.0 * 0.65).epsilon(1e-6));
  const auto f4 = make_from_flux(4, FluxRamp{0.8, 1.2, 1.0, 0.5}, kFineGrid);
  CHECK(adm_mass(f4) == Approx(1.2).epsilon(1e-6));
}

TEST_CASE("constant flux reproduces schwarzschild nodewise") {
  const int n = 3;
  const double mass = 2.0;
  const auto sch = make_schwarzschild(n, mass, kFineGrid);
  const double f = (n - 2.0) * mass / 2.0;
  const auto flux = make_from_flux(n, FluxRamp{f, f, 1.0, 0.5}, kFineGrid);
  REQUIRE(flux.grid->size() == sch.grid->size());
  // same anchor rho0, hence identical grids
  CHECK(flux.rho0 == Approx(sch.rho0).epsilon(1e-10));
  for (std::size_t j = 0; j < sch.grid->size(); j += 7) {
    const double exact = 1.0 + mass / 2.0 * std::pow(flux.grid->nodes[j], 2.0 - n);
    CHECK(flux.U.values()[j] == Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("flat flux has no minimal sphere") {
  CHECK_THROWS_AS(make_from_flux(3, FluxRamp{0.0, 0.0, 1.0, 0.5}, kTestGrid, true),
                  numeric_error);
}

TEST_CASE("flux family minimal boundary matches the shooting oracle") {
  const auto m = make_from_flux(3, FluxRamp{0.35, 0.5, 1.2, 0.5}, kFineGrid);
  CHECK(std::fabs(boundary_mean_curvature(m, m.rho0)) < 1e-8);
  // independent bisection of H(rho) = 0 on the built metric
  double lo = m.rho0 * 0.8, hi = m.rho0 * 1.25;
  REQUIRE(boundary_mean_curvature(m, lo) < 0.0);
  REQUIRE(boundary_mean_curvature(m, hi) > 0.0);
  for (int i = 0; i < 100; ++i) {
    const double mid = std::sqrt(lo * hi);
    (boundary_mean_curvature(m, mid) < 0.0 ? lo : hi) = mid;
  }
  CHECK(m.rho0 == Approx(0.5 * (lo + hi)).epsilon(1e-6));
  CHECK(verify_outer_minimizing(m.U, m.rho0, 2048) > -1e-9 * sphere_area(m.U, m.rho0));
}

TEST_CASE("scalar curvature") {
  const auto sch = make_schwarzschild(3, 2.0, kTestGrid);
  CHECK(std::fabs(scalar_curvature(sch, 1.3)) < 1e-14);
  const auto flat = make_from_flux(3, FluxRamp{0.0, 0.0, 1.0, 0.5}, kTestGrid, false, 1.0);
  CHECK(std::fabs(scalar_curvature(flat, 2.0)) < 1e-14);

  const auto m = make_from_flux(3, FluxRamp{0.35, 0.5, 1.2, 0.5}, kFineGrid);
  // strictly increasing flux: R > 0 where the ramp is active
  CHECK(scalar_curvature(m, 1.2) > 0.0);
  CHECK(scalar_curvature(m, 2.0) > 0.0);

  // finite-difference oracle on (r^{n-1} U')' from node values
  const RadialGrid& g = *m.grid;
  for (std::size_t j : {g.size() / 3, g.size() / 2}) {
    const double rm = g.nodes[j - 1], r0 = g.nodes[j], rp = g.nodes[j + 1];
    auto flux_of = [&](double ra, double rb) {
      return -std::pow(std::sqrt(ra * rb), g.n - 1.0) * (m.U(rb) - m.U(ra)) / (rb - ra);
    };
    const double dflux = (flux_of(r0, rp) - flux_of(rm, r0)) / (0.5 * (rp - rm));
    const double oracle = conformal_dimension_constant(g.n) *
                          std::pow(m.U(r0), -(g.n + 2.0) / (g.n - 2.0)) *
                          std::pow(r0, 1.0 - g.n) * dflux;
    CHECK(scalar_curvature(m, r0) == Approx(oracle).margin(1e-6 * std::fabs(oracle) + 1e-12));
  }

  // nonnegativity at every node (monotone flux interpolation)
  for (std::size_t j = 1; j + 1 < g.size(); ++j)
    CHECK(scalar_curvature(m, g.nodes[j]) >= -1e-15);

  CHECK_THROWS_AS(scalar_curvature(m, m.grid->r_out() * 10.0), config_error);
}

TEST_CASE("sphere areas") {
  auto grid = std::make_shared<const RadialGrid>(make_log_grid(3, 1.0, kTestGrid));
  const auto flat3 = constant_profile(grid, 1.0);
  CHECK(sphere_area(flat3, 1.0) == Approx(4.0 * M_PI).epsilon(1e-14));

  auto grid4 = std::make_shared<const RadialGrid>(make_log_grid(4, 1.0, kTestGrid));
  const auto flat4 = constant_profile(grid4, 1.0);
  CHECK(sphere_area(flat4, 2.0) == Approx(16.0 * M_PI * M_PI).epsilon(1e-12));

  // n omega_n rho^{n-1} closed form for all n in 3..10
  for (int n = 3; n <= 10; ++n) {
    auto gn = std::make_shared<const RadialGrid>(make_log_grid(n, 1.0, kTestGrid));
    const auto one = constant_profile(gn, 1.0);
    const double rho = 1.37;
    CHECK(sphere_area(one, rho) ==
          Approx(n * unit_ball_volume(n) * std::pow(rho, n - 1.0)).epsilon(1e-12));
  }

  // scaling under phi -> lambda phi
  const auto sch = make_schwarzschild(3, 2.0, kTestGrid);
  const auto lam = multiply(constant_profile(sch.grid, 1.7), sch.U);
  CHECK(sphere_area(lam, 2.0) ==
        Approx(sphere_area(sch.U, 2.0) * std::pow(1.7, 4.0)).epsilon(1e-12));
}

TEST_CASE("mean curvature") {
  auto grid = std::make_shared<const RadialGrid>(make_log_grid(3, 1.0, kTestGrid));
  const auto flat = constant_profile(grid, 1.0);
  CHECK(mean_curvature(flat, 1.0) == Approx(2.0).epsilon(1e-12));

  for (int n : {3, 5}) {
    const auto sch = make_schwarzschild(n, 2.0, kTestGrid);
    CHECK(std::fabs(boundary_mean_curvature(sch, sch.rho0)) < 1e-10);
  }

  const auto sch = make_schwarzschild(3, 2.0, kTestGrid);
  CHECK(mean_curvature(sch.U, 2.0) == Approx(4.0 / 27.0).epsilon(1e-5));
  CHECK(mean_curvature(sch.U, 2.0) > 0.0);

  // orientation antisymmetry, exactly
  for (double rho : {1.0, 1.9, 13.0}) {
    const double he = mean_curvature(sch.U, rho, Orientation::toward_end);
    const double hh = mean_curvature(sch.U, rho, Orientation::toward_hole);
    CHECK(he + hh == 0.0);
  }
}

TEST_CASE("monotone interpolation and tails") {
  auto grid = std::make_shared<const RadialGrid>(make_log_grid(3, 1.0, GridSpec{64, 1e3, 0.5}));
  std::vector<double> vals(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j)
    vals[j] = 1.0 + 1.0 / (1.0 + grid->nodes[j]);  // strictly decreasing
  RadialProfile p(grid, vals, TailModel{1.0, 1.0, 1.0});
  for (std::size_t j = 0; j + 1 < grid->size(); ++j) {
    const double rm = std::sqrt(grid->nodes[j] * grid->nodes[j + 1]);
    CHECK(p(rm) <= p.values()[j] + 1e-15);
    CHECK(p(rm) >= p.values()[j + 1] - 1e-15);
  }
  // beyond r_out the tail model applies
  const double rfar = grid->r_out() * 100.0;
  CHECK(p(rfar) == Approx(1.0 + 1.0 / rfar).epsilon(1e-12));
}

TEST_CASE("tail fit recovers coefficients") {
  const auto sch = make_schwarzschild(4, 1.5, kTestGrid);
  const TailFit fit = fit_tail(sch.U, 1.0);
  CHECK(fit.coeff == Approx(0.75).epsilon(1e-9));
}

TEST_CASE("tabulated scenario input") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "confflow_table_test.txt";
  {
    std::ofstream out(path);
    out << "# radius  U\n";
    const int rows = 4000;
    for (int i = 0; i < rows; ++i) {
      const double r = 0.5 * std::pow(4e6, i / (rows - 1.0));
      out << format_double17(r) << " " << format_double17(1.0 + 1.0 / r) << "\n";
    }
  }
  const auto m = make_tabulated(3, path.string(), 1.0, 1024);
  CHECK(m.rho0 == Approx(1.0));
  CHECK(m.U(2.0) == Approx(1.5).epsilon(1e-5));
  CHECK(adm_mass(m) == Approx(2.0).epsilon(1e-4));
  fs::remove(path);

  CHECK_THROWS_AS(make_tabulated(3, "/nonexistent/table.txt", 1.0), config_error);
}
