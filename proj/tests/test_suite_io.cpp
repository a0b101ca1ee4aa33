#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "confflow/suite.hpp"

using namespace confflow;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario tiny_schwarzschild() {
  Scenario sc;
  sc.kind = "schwarzschild";
  sc.n = 3;
  sc.mass = 2.0;
  sc.label = "tiny";
  sc.grid = GridSpec{512, 1e6, 0.5};
  return sc;
}

}  // namespace

TEST_CASE("trace CSV round trip") {
  const Scenario sc = tiny_schwarzschild();
  const BackgroundMetric m = make_metric(sc);
  const FlowTrace tr = run_flow(m, 0.1, 0.3, {}, serialize(sc)).trace;
  const fs::path path = fs::temp_directory_path() / "confflow_trace_roundtrip.csv";
  write_atomic(path, trace_to_csv(tr));

  const FlowTrace back = trace_from_csv(path);
  CHECK(back.n == tr.n);
  CHECK(back.eps == tr.eps);
  CHECK(back.m0 == tr.m0);  // 17 significant digits round-trip exactly
  REQUIRE(back.rows.size() == tr.rows.size());
  for (std::size_t k = 0; k < tr.rows.size(); ++k) {
    CHECK(back.rows[k].mass == tr.rows[k].mass);
    CHECK(back.rows[k].rho == tr.rows[k].rho);
    CHECK(back.rows[k].vmin == tr.rows[k].vmin);
  }
  const Scenario sc2 = parse_scenario_string(back.scenario);
  CHECK(sc2.mass == sc.mass);
  fs::remove(path);
}

TEST_CASE("csv header is the documented schema") {
  CHECK(std::string(kCsvHeader) ==
        "t,rho,rho_normalized,area_flow,area_bg,mass,cap_bg,cap_flow,mtilde,b_coeff,"
        "B_integral,umin,vmin");
}

TEST_CASE("scenario run writes artifacts and report recomputes them") {
  const fs::path dir = fs::temp_directory_path() / "confflow_suite_test";
  fs::remove_all(dir);
  const Scenario sc = tiny_schwarzschild();
  ToleranceSet tol;
  const ScenarioReport rep =
      run_scenario(sc, {0.1, 0.05}, 0.4, tol, dir / "scenario_000", true);
  CHECK(rep.all_pass);
  CHECK(fs::exists(dir / "scenario_000" / "trace_eps_0.1.csv"));
  CHECK(fs::exists(dir / "scenario_000" / "trace_eps_0.05.csv"));
  CHECK(fs::exists(dir / "scenario_000" / "extrapolated.csv"));
  CHECK(fs::exists(dir / "scenario_000" / "summary.txt"));
  CHECK(fs::exists(dir / "scenario_000" / "summary.json"));

  CHECK(report_from_dir(dir, tol, true) == 0);
  fs::remove_all(dir);
}

TEST_CASE("a horizon shorter than the step is a trivially passing run") {
  const fs::path dir = fs::temp_directory_path() / "confflow_tiny_t";
  fs::remove_all(dir);
  ToleranceSet tol;
  const ScenarioReport rep =
      run_scenario(tiny_schwarzschild(), {0.1}, 0.01, tol, dir / "scenario_000", true);
  CHECK(rep.all_pass);
  CHECK(report_from_dir(dir, tol, true) == 0);
  fs::remove_all(dir);
}

TEST_CASE("suite outputs are byte identical across reruns") {
  RunConfig cfg;
  cfg.scenario = tiny_schwarzschild();
  cfg.eps_ladder = {0.1, 0.05};
  cfg.t_max = 0.4;
  cfg.quiet = true;

  const fs::path d1 = fs::temp_directory_path() / "confflow_det_a";
  const fs::path d2 = fs::temp_directory_path() / "confflow_det_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  cfg.out_dir = d1.string();
  CHECK(run_suite(cfg) == 0);
  cfg.out_dir = d2.string();
  CHECK(run_suite(cfg) == 0);

  for (const char* rel :
       {"summary.txt", "summary.json", "scenario_000/trace_eps_0.1.csv",
        "scenario_000/trace_eps_0.05.csv", "scenario_000/extrapolated.csv",
        "scenario_000/summary.txt", "scenario_000/summary.json"}) {
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}
