#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "confflow/flow.hpp"

using namespace confflow;
using Catch::Approx;

namespace {
const GridSpec kTestGrid{2048, 1e6, 0.5};

// On schwarzschild data the whole discrete flow is closed-form: the total
// factor stays of the form c_k + d_k r^{2-n} with
//   c_k = (1-eps)^k,   d_k = (m0/2)(1+eps)^k,
// so every diagnostic has an exact value to test against.
struct SchwarzschildRecursion {
  double eps, m0;
  double c(long k) const { return std::pow(1.0 - eps, static_cast<double>(k)); }
  double d(long k) const { return m0 / 2.0 * std::pow(1.0 + eps, static_cast<double>(k)); }
  double rho(long k, int n) const { return std::pow(d(k) / c(k), 1.0 / (n - 2)); }
  double mass(long k) const { return 2.0 * c(k) * d(k); }
  double cap_bg(long k, int n) const { return std::pow(rho(k, n), n - 2.0) + m0 / 2.0; }
};
}  // namespace

TEST_CASE("initial state and first step match the closed forms") {
  const auto m = make_schwarzschild(3, 2.0, kTestGrid);
  const FlowState s0 = initial_state(m, 0.1);
  CHECK(s0.rho == Approx(1.0).epsilon(1e-4));
  CHECK(s0.v.profile(3.0) == Approx(-0.5).epsilon(1e-4));
  CHECK(s0.v.asymptote == -1.0);
  CHECK(s0.cap_bg == Approx(2.0).epsilon(1e-4));

  const FlowState s1 = step(s0, m);
  CHECK(s1.t == Approx(0.1));
  CHECK(s1.u(3.0) == Approx(0.95).epsilon(1e-5));
  CHECK(s1.u.tail().value == Approx(0.9).epsilon(1e-12));

  CHECK_THROWS_AS(initial_state(m, 0.7), config_error);
}

TEST_CASE("a forced zero potential leaves u unchanged") {
  const auto m = make_schwarzschild(3, 2.0, kTestGrid);
  const FlowState s0 = initial_state(m, 0.1);
  const HarmonicSolution zero = potential(m.U, s0.rho, 0.0, 0.0);
  const RadialProfile u1 = axpy(s0.u, 0.1, zero.profile);
  for (std::size_t j = 0; j < u1.values().size(); ++j)
    CHECK(u1.values()[j] == s0.u.values()[j]);
}

TEST_CASE("flat exterior step") {
  const auto flat = make_from_flux(3, FluxRamp{0.0, 0.0, 1.0, 0.5}, kTestGrid, false, 1.0);
  const FlowState s0 = initial_state(flat, 0.1);
  CHECK(s0.rho == Approx(1.0).epsilon(1e-8));
  // v_0(r) = -(1 - 1/r)
  CHECK(s0.v.profile(2.0) == Approx(-0.5).epsilon(1e-8));
  CHECK(s0.v.profile(10.0) == Approx(-0.9).epsilon(1e-8));
}

TEST_CASE("discrete schwarzschild flow follows the exact recursion") {
  for (int n : {3, 4}) {
    const double eps = 0.1, m0 = 2.0;
    const auto m = make_schwarzschild(n, m0, kTestGrid);
    const SchwarzschildRecursion ex{eps, m0};
    const RunResult rr = run_flow(m, eps, n == 3 ? 1.0 : 0.5, {}, "sch");
    const auto& rows = rr.trace.rows;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto lk = static_cast<long>(k);
      CHECK(rows[k].rho == Approx(ex.rho(lk, n)).epsilon(1e-3));
      CHECK(rows[k].cap_bg == Approx(ex.cap_bg(lk, n)).epsilon(1e-3));
      CHECK(rows[k].b_coeff == Approx(ex.c(lk) * ex.cap_bg(lk, n)).epsilon(1e-3));
      // area tracks n omega_n (2 m_disc)^{(n-1)/(n-2)}
      const double area_ex =
          n * unit_ball_volume(n) * std::pow(2.0 * ex.mass(lk), (n - 1.0) / (n - 2.0));
      CHECK(rows[k].area_flow == Approx(area_ex).epsilon(1e-3));
      // the equality case keeps mtilde at zero
      CHECK(std::fabs(rows[k].mtilde) < 1e-4 * m0);
      // normalized radius equals the running mass estimate
      CHECK(rows[k].rho_normalized ==
            Approx(std::pow(ex.mass(lk) / 2.0, 1.0 / (n - 2))).epsilon(1e-3));
      // flow-metric capacity reproduces the discrete mass (equality case)
      CHECK(rows[k].cap_flow == Approx(ex.mass(lk)).epsilon(1e-3));
    }
  }
}

TEST_CASE("trace row zero is the initial data") {
  const auto m = make_from_flux(3, FluxRamp{0.35, 0.5, 1.2, 0.5}, kTestGrid);
  const RunResult rr = run_flow(m, 0.1, 0.1, {}, "f");
  CHECK(rr.trace.rows.front().t == 0.0);
  CHECK(rr.trace.rows.front().mass == Approx(adm_mass(m)).epsilon(1e-12));
  CHECK(rr.trace.rows.front().rho == Approx(m.rho0).epsilon(1e-4));
}

TEST_CASE("mass series") {
  // t = 0 row is exactly m0
  FlowTrace tr;
  tr.rows.resize(1);
  tr.rows[0].t = 0.0;
  tr.rows[0].cap_bg = 17.0;
  CHECK(mass_series(tr, 3.25)[0] == 3.25);

  // constant ledger has the closed form m0 e^{-2t} + 2 cbar (e^{-t} - e^{-2t})
  const double cbar = 0.7, m0 = 2.0, eps = 0.02;
  std::vector<LedgerEntry> ledger;
  for (int k = 0; k <= 100; ++k) ledger.push_back({k * eps, cbar, cbar});
  const auto ms = mass_series_from_ledger(ledger, m0);
  for (std::size_t k = 0; k < ledger.size(); k += 10) {
    const double t = ledger[k].t;
    const double exact = m0 * std::exp(-2 * t) + 2 * cbar * (std::exp(-t) - std::exp(-2 * t));
    CHECK(ms[k] == Approx(exact).margin(1e-4));
  }

  // schwarzschild is the fixed point up to discretization
  const auto m = make_schwarzschild(3, 2.0, kTestGrid);
  const RunResult rr = run_flow(m, 0.05, 2.0, {}, "s");
  for (const auto& r : rr.trace.rows) CHECK(r.mass == Approx(2.0).epsilon(0.01));
}

TEST_CASE("mass ode residual") {
  // forced ledger: constant mass equal to cap_flow gives zero residual
  FlowTrace tr;
  tr.eps = 0.1;
  tr.rows.resize(11);
  for (int k = 0; k <= 10; ++k) {
    tr.rows[k].t = 0.1 * k;
    tr.rows[k].mass = 1.5;
    tr.rows[k].cap_flow = 1.5;
  }
  for (double r : mass_ode_residual(tr)) CHECK(r == 0.0);

  // refinement shrinks the residual on schwarzschild by >= 1.5x
  const auto m = make_schwarzschild(3, 2.0, kTestGrid);
  const double r1 = max_abs(mass_ode_residual(run_flow(m, 0.1, 1.0, {}, "s").trace));
  const double r2 = max_abs(mass_ode_residual(run_flow(m, 0.05, 1.0, {}, "s").trace));
  CHECK(r1 >= 1.5 * r2);
}

TEST_CASE("vanishing mass checks") {
  // synthetic trace with b = 0: mtilde and mass identities are exact
  FlowTrace tr;
  tr.eps = 0.5;
  tr.m0 = 2.0;
  for (int k = 0; k <= 8; ++k) {
    TraceRow r;
    r.t = 0.5 * k;
    r.b_coeff = 0.0;
    r.B_integral = 0.0;
    r.mtilde = 2.0 * std::exp(-2.0 * r.t);
    r.mass = 2.0 * std::exp(-2.0 * r.t);
    tr.rows.push_back(r);
  }
  const VanishingMassReport rep = vanishing_mass_checks(tr);
  CHECK(rep.mtilde_identity < 1e-14);
  CHECK(rep.mass_identity < 1e-14);
  CHECK(rep.etb_violation == 0.0);

  // schwarzschild: b(0) equals the initial capacity m0
  const auto m = make_schwarzschild(3, 2.0, kTestGrid);
  const RunResult rr = run_flow(m, 0.1, 0.2, {}, "s");
  CHECK(rr.trace.rows.front().b_coeff == Approx(2.0).epsilon(1e-3));

  // flux family: mtilde decays and e^t b(t) is nondecreasing
  const auto f = make_from_flux(3, FluxRamp{0.35, 0.5, 1.2, 0.5}, kTestGrid);
  const RunResult fr = run_flow(f, 0.05, 4.0, {}, "f");
  const VanishingMassReport frep = vanishing_mass_checks(fr.trace);
  CHECK(frep.terminal_mtilde < frep.mtilde_at_half);
  CHECK(frep.etb_violation <= 1e-6);

  CHECK_THROWS_AS(vanishing_mass_checks(rr.trace), config_error);  // T < 4
}

TEST_CASE("richardson extrapolation") {
  // identical traces extrapolate to themselves
  FlowTrace a;
  a.eps = 0.1;
  a.t_max = 0.2;
  a.scenario = "x";
  for (int k = 0; k <= 2; ++k) {
    TraceRow r;
    r.t = 0.1 * k;
    r.mass = 2.0 + 0.1 * k;
    r.rho = 1.0;
    a.rows.push_back(r);
  }
  FlowTrace b = a;
  b.eps = 0.05;
  b.rows.clear();
  for (int k = 0; k <= 4; ++k) {
    TraceRow r;
    r.t = 0.05 * k;
    r.mass = 2.0 + 0.1 * r.t * 10.0;
    r.rho = 1.0;
    b.rows.push_back(r);
  }
  const FlowTrace same = extrapolate({a, b});
  CHECK(same.eps == 0.0);
  CHECK(same.rows[1].mass == Approx(a.rows[1].mass).epsilon(1e-14));

  // exact linear-in-eps error extrapolates exactly
  auto synthetic = [](double eps) {
    FlowTrace t;
    t.eps = eps;
    t.t_max = 0.2;
    t.scenario = "lin";
    for (int k = 0; k * eps <= 0.2 + 1e-12; ++k) {
      TraceRow r;
      r.t = k * eps;
      r.mass = 1.0 + 3.0 * eps;  // pure first-order error
      r.rho = 2.0 - eps;
      t.rows.push_back(r);
    }
    return t;
  };
  const FlowTrace ex = extrapolate({synthetic(0.1), synthetic(0.05)});
  CHECK(ex.rows[0].mass == Approx(1.0).epsilon(1e-13));
  CHECK(ex.rows[0].rho == Approx(2.0).epsilon(1e-13));

  // schwarzschild pair lands closer to the true mass than either input
  const auto m = make_schwarzschild(3, 2.0, kTestGrid);
  const FlowTrace t1 = run_flow(m, 0.1, 1.0, {}, "s").trace;
  const FlowTrace t2 = run_flow(m, 0.05, 1.0, {}, "s").trace;
  const FlowTrace xt = extrapolate({t1, t2});
  const double e1 = std::fabs(t1.rows.back().mass - 2.0);
  const double e2 = std::fabs(t2.rows.back().mass - 2.0);
  const double ex2 = std::fabs(xt.rows.back().mass - 2.0);
  CHECK(ex2 <= e1);  // the ledger-route error is second order here, so the
                     // first-order pair beats the coarse input only
  const FlowTrace t3 = run_flow(m, 0.025, 1.0, {}, "s").trace;
  const FlowTrace x3 = extrapolate({t1, t2, t3});
  const double e3 = std::fabs(t3.rows.back().mass - 2.0);
  const double ex3 = std::fabs(x3.rows.back().mass - 2.0);
  CHECK(ex3 <= e3);  // the three-member ladder beats every input
  CHECK(ex3 <= ex2);

  // non-nested ladders are rejected
  FlowTrace c = synthetic(0.07);
  c.t_max = 0.21;
  CHECK_THROWS_AS(extrapolate({synthetic(0.1), c}), config_error);
}

TEST_CASE("nesting and pointwise monotonicity along a run") {
  const auto f = make_from_flux(3, FluxRamp{0.35, 0.5, 1.2, 0.5}, kTestGrid);
  const double eps = 0.05;
  FlowState s = initial_state(f, eps);
  const RadialGrid& g = *f.grid;
  for (int k = 0; k < 12; ++k) {
    const FlowState next = step(s, f);
    // slices separate strictly once the flow runs
    CHECK(next.rho > s.rho);
    // u is nonincreasing in t at every node, and e^t v_t is nondecreasing
    for (std::size_t j = 0; j < g.size(); j += 97) {
      CHECK(next.u.values()[j] <= s.u.values()[j] + 1e-15);
      const double evs = std::exp(s.t) * s.v.profile.values()[j];
      const double evn = std::exp(next.t) * next.v.profile.values()[j];
      CHECK(evn >= evs - 1e-12);
    }
    s = next;
  }
}

TEST_CASE("high-dimension flux data runs the full pipeline") {
  // n = 8 needs a ramp that finishes well inside the tail-fit window: the
  // steep decay r^{2-n} underflows against 1 before a slow ramp would die out
  const auto m = make_from_flux(8, FluxRamp{2.0, 3.0, 0.7, 0.2}, GridSpec{4096, 1e6, 0.5});
  CHECK(adm_mass(m) == Approx(1.0).epsilon(1e-5));
  const RunResult rr = run_flow(m, 0.1, 0.5, {}, "f8");
  CHECK(rr.trace.rows.front().mass - rr.trace.rows.front().cap_flow > 0.0);
  for (std::size_t k = 1; k < rr.trace.rows.size(); ++k)
    CHECK(rr.trace.rows[k].rho > rr.trace.rows[k - 1].rho);
}

TEST_CASE("scheme bounds hold along flux runs") {
  const auto f = make_from_flux(4, FluxRamp{0.8, 1.2, 1.0, 0.5}, kTestGrid);
  const RunResult rr = run_flow(f, 0.1, 2.0, {}, "f4");
  const double T = 2.0;
  for (const auto& r : rr.trace.rows) {
    CHECK(r.umin >= std::pow(4.0, -T) - 1e-12);
    CHECK(r.umin <= 1.0 + 1e-12);
    CHECK(r.vmin <= 1e-15);
    const long k = std::lround(r.t / 0.1);
    CHECK(r.vmin >= -std::pow(0.9, static_cast<double>(k)) - 1e-12);
  }
  // rho is nondecreasing and the radius bound fit holds
  for (std::size_t k = 1; k < rr.trace.rows.size(); ++k) {
    CHECK(rr.trace.rows[k].rho >= rr.trace.rows[k - 1].rho);
    CHECK(rr.trace.rows[k].rho <=
          rr.trace.r_max_fit * std::exp(2.0 * rr.trace.rows[k].t / (4 - 2)) * (1.0 + 1e-9));
  }
  // u at fixed radius is nonincreasing in t: umin column is taken at the far
  // end, so compare the tracked tail values instead
  // (checked in the schwarzschild recursion test through u.tail)
}
