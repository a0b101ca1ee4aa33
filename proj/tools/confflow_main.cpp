// Command-line driver: `run` a single scenario, `suite` a config-driven
// scenario x eps ladder, or `report` (recompute checks from existing CSVs).
// Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "confflow/config.hpp"
#include "confflow/suite.hpp"

namespace {

confflow::RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw confflow::config_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return confflow::parse_config(ss.str());
}

struct CliOverrides {
  std::string out_dir;
  std::vector<double> eps;
  double t_max = -1.0;
  int n = -1;
  long grid_points = -1;
  bool quiet = false;
};

void apply_overrides(confflow::RunConfig& cfg, const CliOverrides& ov) {
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (!ov.eps.empty()) cfg.eps_ladder = ov.eps;
  if (ov.t_max > 0.0) cfg.t_max = ov.t_max;
  if (ov.n > 0) cfg.scenario.n = ov.n;
  if (ov.grid_points > 0) cfg.scenario.grid.points = static_cast<std::size_t>(ov.grid_points);
  if (ov.quiet) cfg.quiet = true;
  confflow::validate_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal-flow laboratory for rotationally symmetric asymptotically flat data"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  CliOverrides ov;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    if (need_config)
      sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--out", ov.out_dir, "output directory override");
    sub->add_option("--eps", ov.eps, "time step ladder override (repeatable)");
    sub->add_option("--t-max", ov.t_max, "flow horizon override");
    sub->add_option("--n", ov.n, "dimension override");
    sub->add_option("--grid-points", ov.grid_points, "radial grid size override");
    sub->add_flag("--quiet", ov.quiet, "suppress progress output");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "run a single scenario over the eps ladder");
  add_common(cmd_run, true);
  CLI::App* cmd_suite = app.add_subcommand("suite", "run the full config-driven suite");
  add_common(cmd_suite, true);
  CLI::App* cmd_report =
      app.add_subcommand("report", "recompute checks from existing trace CSVs");
  cmd_report->add_option("--out", out_dir, "directory with scenario_* subdirectories")
      ->required();
  cmd_report->add_flag("--quiet", ov.quiet, "suppress progress output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(cmd_report)) {
      confflow::ToleranceSet tol;
      return confflow::report_from_dir(out_dir, tol, ov.quiet);
    }
    confflow::RunConfig cfg = load_config(config_path);
    apply_overrides(cfg, ov);
    if (app.got_subcommand(cmd_run)) cfg.count = 1;
    return confflow::run_suite(cfg);
  } catch (const confflow::config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const confflow::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
