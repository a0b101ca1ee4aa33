#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "confflow/errors.hpp"
#include "confflow/profiles.hpp"

namespace confflow {

// Locale-independent shortest-exact formatting (round-trips through parsing).
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// 17 significant digits, for the lossless CSV columns.
inline std::string format_double17(double x) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

// Declarative construction recipe for admissible initial data.
struct Scenario {
  std::string kind = "schwarzschild";  // schwarzschild | flux_family | tabulated
  int n = 3;
  double mass = 1.0;  // schwarzschild
  FluxRamp ramp;      // flux_family
  bool minimal_boundary = true;
  std::optional<double> rho0;  // required when minimal_boundary = false
  std::string table_path;     // tabulated
  double table_rho0 = 1.0;
  GridSpec grid;
  std::string label = "scenario";
};

inline BackgroundMetric make_metric(const Scenario& sc) {
  if (sc.kind == "schwarzschild") return make_schwarzschild(sc.n, sc.mass, sc.grid);
  if (sc.kind == "flux_family")
    return make_from_flux(sc.n, sc.ramp, sc.grid, sc.minimal_boundary, sc.rho0);
  if (sc.kind == "tabulated")
    return make_tabulated(sc.n, sc.table_path, sc.table_rho0, sc.grid.points);
  throw config_error("unknown scenario kind '" + sc.kind + "'");
}

inline std::string serialize(const Scenario& sc) {
  std::ostringstream os;
  os << "kind=" << sc.kind << " n=" << sc.n << " label=" << sc.label;
  auto num = [&](const char* k, double v) { os << " " << k << "=" << format_double(v); };
  if (sc.kind == "schwarzschild") num("mass", sc.mass);
  if (sc.kind == "flux_family") {
    num("f0", sc.ramp.f0);
    num("f1", sc.ramp.f1);
    num("ramp_center", sc.ramp.rc);
    num("ramp_width", sc.ramp.w);
    os << " minimal_boundary=" << (sc.minimal_boundary ? 1 : 0);
    if (sc.rho0) num("rho0", *sc.rho0);
  }
  if (sc.kind == "tabulated") {
    os << " path=" << sc.table_path;
    num("rho0", sc.table_rho0);
  }
  num("grid_points", static_cast<double>(sc.grid.points));
  num("r_out_mult", sc.grid.r_out_mult);
  num("r_min_frac", sc.grid.r_min_frac);
  return os.str();
}

inline Scenario parse_scenario_string(const std::string& text) {
  Scenario sc;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw config_error("scenario string: bad token '" + tok + "'");
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "kind") sc.kind = v;
    else if (k == "n") sc.n = std::stoi(v);
    else if (k == "label") sc.label = v;
    else if (k == "mass") sc.mass = std::stod(v);
    else if (k == "f0") sc.ramp.f0 = std::stod(v);
    else if (k == "f1") sc.ramp.f1 = std::stod(v);
    else if (k == "ramp_center") sc.ramp.rc = std::stod(v);
    else if (k == "ramp_width") sc.ramp.w = std::stod(v);
    else if (k == "minimal_boundary") sc.minimal_boundary = (v != "0");
    else if (k == "rho0") { if (sc.kind == "tabulated") sc.table_rho0 = std::stod(v); else sc.rho0 = std::stod(v); }
    else if (k == "path") sc.table_path = v;
    else if (k == "grid_points") sc.grid.points = static_cast<std::size_t>(std::stod(v));
    else if (k == "r_out_mult") sc.grid.r_out_mult = std::stod(v);
    else if (k == "r_min_frac") sc.grid.r_min_frac = std::stod(v);
    else throw config_error("scenario string: unknown key '" + k + "'");
  }
  return sc;
}

// Named tolerance overrides for the suite-level checks.
struct ToleranceSet {
  double mass_monotonicity = 1e-4;  // * m0, per extrapolated row
  double area_drift = 0.03;         // extrapolated trace, relative
  double mass_capacity = 1e-4;      // * max(1, m0); covers the outward tie
                                    // resolution of the enclosure search on
                                    // equality-case data
  double mass_ode_scale = 4.0;      // * m0 * finest eps * max(T, 1)
  double mtilde_ratio = 0.1;        // |mtilde(T)| / |mtilde(0.5)|
  double etb_slack = 1e-6;          // relative row-to-row decrease allowance
  double rho_gap = 2e-2;            // relative, at T
  double penrose_min = -1e-8;       // * max(1, m0)
  double gap_decay = 0.25;          // u-gap(T) / u-gap(2), gated for T >= 8
};

struct RunConfig {
  Scenario scenario;
  int count = 1;              // flux_family: number of perturbed instances
  std::uint64_t seed = 0;     // perturbation stream
  std::vector<double> eps_ladder = {0.1, 0.05};
  double t_max = 2.0;
  std::string out_dir = "out";
  bool quiet = false;
  ToleranceSet tol;
};

namespace detail {

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

struct RawConfig {
  std::map<std::string, ConfigEntry> kv;  // "section.key" -> entry

  const ConfigEntry* find(const std::string& sk) const {
    auto it = kv.find(sk);
    return it == kv.end() ? nullptr : &it->second;
  }
  ConfigEntry* find(const std::string& sk) {
    auto it = kv.find(sk);
    return it == kv.end() ? nullptr : &it->second;
  }
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline RawConfig tokenize_config(const std::string& text) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(lineno) + ": empty key");
    const std::string sk = section + "." + key;
    if (auto* prev = raw.find(sk))
      throw config_error("config: duplicate key '" + key + "' at lines " +
                         std::to_string(prev->line) + " and " + std::to_string(lineno));
    raw.kv[sk] = ConfigEntry{val, lineno, false};
  }
  return raw;
}

inline double to_double(const ConfigEntry& e, const std::string& sk) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw config_error("config line " + std::to_string(e.line) + ": '" + sk +
                       "' is not a number");
  }
}

inline bool to_bool(const ConfigEntry& e, const std::string& sk) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw config_error("config line " + std::to_string(e.line) + ": '" + sk +
                     "' is not a boolean");
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg) {
  std::vector<std::string> issues;
  if (cfg.scenario.n < 3) issues.push_back("n must be >= 3");
  if (cfg.scenario.kind != "schwarzschild" && cfg.scenario.kind != "flux_family" &&
      cfg.scenario.kind != "tabulated")
    issues.push_back("kind must be schwarzschild, flux_family or tabulated");
  if (cfg.scenario.kind == "schwarzschild" && cfg.scenario.mass <= 0.0)
    issues.push_back("mass must be positive");
  if (cfg.scenario.kind == "flux_family") {
    if (cfg.scenario.ramp.f0 < 0.0) issues.push_back("f0 must be nonnegative");
    if (cfg.scenario.ramp.f1 < cfg.scenario.ramp.f0) issues.push_back("f1 must be >= f0");
    if (cfg.scenario.ramp.w <= 0.0) issues.push_back("ramp_width must be positive");
    if (cfg.scenario.ramp.rc <= 0.0) issues.push_back("ramp_center must be positive");
    if (!cfg.scenario.minimal_boundary && !cfg.scenario.rho0)
      issues.push_back("rho0 required when minimal_boundary = false");
  }
  if (cfg.scenario.kind == "tabulated" && cfg.scenario.table_path.empty())
    issues.push_back("path required for tabulated scenarios");
  if (cfg.eps_ladder.empty()) issues.push_back("eps ladder must not be empty");
  for (double e : cfg.eps_ladder)
    if (!(e > 0.0 && e < 0.5)) issues.push_back("eps must lie in (0, 0.5)");
  for (std::size_t i = 1; i < cfg.eps_ladder.size(); ++i)
    if (cfg.eps_ladder[i] >= cfg.eps_ladder[i - 1])
      issues.push_back("eps ladder must be strictly decreasing");
  if (!(cfg.t_max > 0.0)) issues.push_back("t_max must be positive");
  if (cfg.count < 1) issues.push_back("count must be >= 1");
  if (cfg.scenario.grid.points < 16) issues.push_back("grid points must be >= 16");
  if (!issues.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& s : issues) msg += "\n  - " + s;
    throw config_error(msg);
  }
}

// Parses the key = value configuration document.  Unknown keys are hard
// errors; constraint violations are collected and reported exhaustively.
inline RunConfig parse_config(const std::string& text) {
  detail::RawConfig raw = detail::tokenize_config(text);
  RunConfig cfg;

  auto use_str = [&](const std::string& sk, std::string& dst) {
    if (auto* e = raw.find(sk)) {
      dst = e->value;
      e->used = true;
    }
  };
  auto use_num = [&](const std::string& sk, auto& dst) {
    if (auto* e = raw.find(sk)) {
      dst = static_cast<std::decay_t<decltype(dst)>>(detail::to_double(*e, sk));
      e->used = true;
    }
  };
  auto use_bool = [&](const std::string& sk, bool& dst) {
    if (auto* e = raw.find(sk)) {
      dst = detail::to_bool(*e, sk);
      e->used = true;
    }
  };

  use_str("scenario.kind", cfg.scenario.kind);
  use_num("scenario.n", cfg.scenario.n);
  use_num("scenario.mass", cfg.scenario.mass);
  use_num("scenario.f0", cfg.scenario.ramp.f0);
  use_num("scenario.f1", cfg.scenario.ramp.f1);
  use_num("scenario.ramp_center", cfg.scenario.ramp.rc);
  use_num("scenario.ramp_width", cfg.scenario.ramp.w);
  use_bool("scenario.minimal_boundary", cfg.scenario.minimal_boundary);
  if (auto* e = raw.find("scenario.rho0")) {
    cfg.scenario.rho0 = detail::to_double(*e, "scenario.rho0");
    cfg.scenario.table_rho0 = *cfg.scenario.rho0;
    e->used = true;
  }
  use_str("scenario.path", cfg.scenario.table_path);
  use_str("scenario.label", cfg.scenario.label);
  use_num("scenario.count", cfg.count);
  use_num("scenario.seed", cfg.seed);

  if (auto* e = raw.find("flow.eps")) {
    cfg.eps_ladder.clear();
    std::istringstream ls(e->value);
    std::string item;
    while (std::getline(ls, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      try {
        cfg.eps_ladder.push_back(std::stod(item));
      } catch (...) {
        throw config_error("config line " + std::to_string(e->line) +
                           ": bad eps list entry '" + item + "'");
      }
    }
    e->used = true;
  }
  use_num("flow.t_max", cfg.t_max);

  use_num("grid.points", cfg.scenario.grid.points);
  use_num("grid.r_out_mult", cfg.scenario.grid.r_out_mult);
  use_num("grid.r_min_frac", cfg.scenario.grid.r_min_frac);

  use_str("output.dir", cfg.out_dir);
  use_bool("output.quiet", cfg.quiet);

  use_num("tolerances.mass_monotonicity", cfg.tol.mass_monotonicity);
  use_num("tolerances.area_drift", cfg.tol.area_drift);
  use_num("tolerances.mass_capacity", cfg.tol.mass_capacity);
  use_num("tolerances.mass_ode_scale", cfg.tol.mass_ode_scale);
  use_num("tolerances.mtilde_ratio", cfg.tol.mtilde_ratio);
  use_num("tolerances.etb_slack", cfg.tol.etb_slack);
  use_num("tolerances.rho_gap", cfg.tol.rho_gap);
  use_num("tolerances.penrose_min", cfg.tol.penrose_min);
  use_num("tolerances.gap_decay", cfg.tol.gap_decay);

  for (const auto& [sk, e] : raw.kv)
    if (!e.used)
      throw config_error("config line " + std::to_string(e.line) + ": unknown key '" + sk + "'");

  validate_config(cfg);
  return cfg;
}


// Deterministic perturbed instances of a flux family (uniform jitter of the
// ramp parameters from a seeded stream).
inline std::vector<Scenario> expand_scenarios(const RunConfig& cfg) {
  std::vector<Scenario> out;
  if (cfg.scenario.kind != "flux_family" || cfg.count == 1) {
    Scenario sc = cfg.scenario;
    if (sc.label == "scenario") sc.label = sc.kind;
    out.push_back(sc);
    return out;
  }
  std::uint64_t state = cfg.seed ^ 0x9e3779b97f4a7c15ull;
  auto next_unit = [&]() {  // xorshift*, in [-1, 1]; avoids distribution
    state ^= state >> 12;   // implementation differences across platforms
    state ^= state << 25;
    state ^= state >> 27;
    const std::uint64_t x = state * 0x2545f4914f6cdd1dull;
    return 2.0 * (static_cast<double>(x >> 11) * 0x1.0p-53) - 1.0;
  };
  for (int i = 0; i < cfg.count; ++i) {
    Scenario sc = cfg.scenario;
    sc.ramp.f1 = cfg.scenario.ramp.f1 * (1.0 + 0.25 * next_unit());
    sc.ramp.f0 = std::min(sc.ramp.f1, cfg.scenario.ramp.f0 * (1.0 + 0.25 * next_unit()));
    sc.ramp.rc = cfg.scenario.ramp.rc * (1.0 + 0.3 * next_unit());
    sc.ramp.w = cfg.scenario.ramp.w * (1.0 + 0.2 * next_unit());
    sc.label = cfg.scenario.label == "scenario" ? "flux" : cfg.scenario.label;
    sc.label += "_" + std::to_string(i);
    out.push_back(sc);
  }
  return out;
}

}  // namespace confflow
