#include "csbp/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "csbp/error.hpp"

namespace csbp {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kConfig, where + ": expected an object");
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) fail(ErrorCode::kConfig, where + ": unknown key '" + key + "'");
  }
}

double get_double(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) fail(ErrorCode::kConfig, where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(ErrorCode::kConfig, where + "." + key + ": must be finite");
  return d;
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  fail(ErrorCode::kConfig, where + "." + key + ": expected a non-negative integer");
}

int get_int(const json& j, const char* key, int fallback, const std::string& where) {
  const std::uint64_t v = get_u64(j, key, static_cast<std::uint64_t>(fallback), where);
  if (v > 1'000'000'000) fail(ErrorCode::kConfig, where + "." + key + ": too large");
  return static_cast<int>(v);
}

std::vector<double> get_grid(const json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array()) fail(ErrorCode::kConfig, std::string(key) + ": expected an array");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) fail(ErrorCode::kConfig, std::string(key) + ": entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

JumpMeasure parse_jumps(const json& j, const std::string& where) {
  require_object(j, where);
  if (!j.contains("family") || !j.at("family").is_string()) {
    fail(ErrorCode::kConfig, where + ".family: expected a string");
  }
  const std::string family = j.at("family").get<std::string>();
  if (family == "zero") {
    allow_keys(j, where, {"family"});
    return JumpMeasure::zero();
  }
  if (family == "compound_exponential") {
    allow_keys(j, where, {"family", "rate", "decay"});
    if (!j.contains("rate") || !j.contains("decay")) {
      fail(ErrorCode::kConfig, where + ": compound_exponential needs rate and decay");
    }
    return JumpMeasure::compound_exponential(get_double(j, "rate", 0.0, where),
                                             get_double(j, "decay", 0.0, where));
  }
  if (family == "finite_atoms") {
    allow_keys(j, where, {"family", "atoms"});
    if (!j.contains("atoms") || !j.at("atoms").is_array()) {
      fail(ErrorCode::kConfig, where + ".atoms: expected an array");
    }
    std::vector<Atom> atoms;
    for (const json& a : j.at("atoms")) {
      require_object(a, where + ".atoms[]");
      allow_keys(a, where + ".atoms[]", {"location", "mass"});
      if (!a.contains("location") || !a.contains("mass")) {
        fail(ErrorCode::kConfig, where + ".atoms[]: needs location and mass");
      }
      atoms.push_back({get_double(a, "location", 0.0, where), get_double(a, "mass", 0.0, where)});
    }
    return JumpMeasure::finite_atoms(std::move(atoms));
  }
  fail(ErrorCode::kConfig, where + ".family: unknown family '" + family + "'");
}

json jumps_json(const JumpMeasure& m) {
  const auto& fam = m.family();
  if (const auto* ce = std::get_if<CompoundExponential>(&fam)) {
    return {{"family", "compound_exponential"}, {"rate", ce->rate}, {"decay", ce->decay}};
  }
  if (const auto* fa = std::get_if<FiniteAtoms>(&fam)) {
    json atoms = json::array();
    for (const Atom& a : fa->atoms) atoms.push_back({{"location", a.location}, {"mass", a.mass}});
    return {{"family", "finite_atoms"}, {"atoms", atoms}};
  }
  return {{"family", "zero"}};
}

void check(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::kConfig, message);
}

void validate_config(const ScenarioConfig& c) {
  validate(c.branching, c.immigration);
  check(std::isfinite(c.x) && c.x >= 0.0, "x must be finite and >= 0");
  check(std::isfinite(c.horizon) && c.horizon > 0.0, "horizon must be finite and > 0");
  check(!c.r_grid.empty(), "r_grid must be nonempty");
  check(!c.theta_grid.empty(), "theta_grid must be nonempty");
  for (double r : c.r_grid) check(r >= 0.0 && r <= 1.0, "r_grid entries must lie in [0, 1]");
  for (double th : c.theta_grid) check(std::isfinite(th) && th >= 0.0, "theta_grid entries must be >= 0");
  check(c.replicates >= 1, "replicates must be >= 1");
  check(c.solver.ode_rel_tol > 0.0 && c.solver.ode_abs_tol > 0.0, "ODE tolerances must be > 0");
  check(c.solver.quad_points >= 2, "quad_points must be >= 2");
  check(c.kernel.near_horizon_cutoff > 0.0, "near_horizon_cutoff must be > 0");
  check(c.kernel.time_nodes >= 2 && c.kernel.survival_nodes >= 2, "kernel node counts must be >= 2");
  check(c.kernel.inversion.grid_points >= 16, "grid_points must be >= 16");
  check(c.kernel.inversion.stehfest_terms >= 2 && c.kernel.inversion.stehfest_terms % 2 == 0 &&
            c.kernel.inversion.stehfest_terms <= 20,
        "stehfest_terms must be even and in [2, 20]");
  check(c.kernel.inversion.eps > 0.0 && c.kernel.inversion.ode_rel_tol > 0.0,
        "inversion tolerances must be > 0");
  check(c.backbone.max_population >= 1, "population_guard must be >= 1");
  check(c.thresholds.max_abs_z > 0.0 && c.thresholds.warn_z > 0.0, "z thresholds must be > 0");
  check(c.thresholds.max_warn_fraction >= 0.0 && c.thresholds.max_warn_fraction <= 1.0,
        "max_warn_fraction must lie in [0, 1]");
  check(c.thresholds.ks_alpha > 0.0 && c.thresholds.ks_alpha < 1.0, "ks_alpha must lie in (0, 1)");
  check(c.thresholds.ks_min_pass_fraction >= 0.0 && c.thresholds.ks_min_pass_fraction <= 1.0,
        "ks_min_pass_fraction must lie in [0, 1]");
  check(c.ks_repetitions == 0 || c.ks_samples >= 1, "two_sample.samples must be >= 1");
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["branching"] = {{"alpha", c.branching.alpha},
                    {"beta", c.branching.beta},
                    {"pi", jumps_json(c.branching.pi)}};
  j["immigration"] = {{"delta", c.immigration.delta}, {"nu", jumps_json(c.immigration.nu)}};
  j["x"] = c.x;
  j["horizon"] = c.horizon;
  j["r_grid"] = c.r_grid;
  j["theta_grid"] = c.theta_grid;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["tolerances"] = {{"ode_rel_tol", c.solver.ode_rel_tol},
                     {"ode_abs_tol", c.solver.ode_abs_tol},
                     {"quad_points", c.solver.quad_points},
                     {"inversion_eps", c.kernel.inversion.eps},
                     {"inversion_ode_rel_tol", c.kernel.inversion.ode_rel_tol}};
  j["kernel"] = {{"backend", std::string(backend_name(c.kernel.backend))},
                 {"near_horizon_cutoff", c.kernel.near_horizon_cutoff},
                 {"time_nodes", c.kernel.time_nodes},
                 {"survival_nodes", c.kernel.survival_nodes},
                 {"grid_points", c.kernel.inversion.grid_points},
                 {"stehfest_terms", c.kernel.inversion.stehfest_terms}};
  j["population_guard"] = c.backbone.max_population;
  j["thresholds"] = {{"max_abs_z", c.thresholds.max_abs_z},
                     {"warn_z", c.thresholds.warn_z},
                     {"max_warn_fraction", c.thresholds.max_warn_fraction},
                     {"ks_alpha", c.thresholds.ks_alpha},
                     {"ks_min_pass_fraction", c.thresholds.ks_min_pass_fraction}};
  j["two_sample"] = {{"samples", c.ks_samples}, {"repetitions", c.ks_repetitions}};
  return j;
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("malformed JSON: ") + e.what());
  }
  require_object(j, "config");
  allow_keys(j, "config",
             {"branching", "immigration", "x", "horizon", "r_grid", "theta_grid", "replicates", "seed",
              "tolerances", "kernel", "population_guard", "thresholds", "two_sample"});
  ScenarioConfig c;
  if (j.contains("branching")) {
    const json& b = j.at("branching");
    require_object(b, "branching");
    allow_keys(b, "branching", {"alpha", "beta", "pi"});
    c.branching.alpha = get_double(b, "alpha", c.branching.alpha, "branching");
    c.branching.beta = get_double(b, "beta", c.branching.beta, "branching");
    if (b.contains("pi")) c.branching.pi = parse_jumps(b.at("pi"), "branching.pi");
  }
  if (j.contains("immigration")) {
    const json& im = j.at("immigration");
    require_object(im, "immigration");
    allow_keys(im, "immigration", {"delta", "nu"});
    c.immigration.delta = get_double(im, "delta", c.immigration.delta, "immigration");
    if (im.contains("nu")) c.immigration.nu = parse_jumps(im.at("nu"), "immigration.nu");
  }
  c.x = get_double(j, "x", c.x, "config");
  c.horizon = get_double(j, "horizon", c.horizon, "config");
  c.r_grid = get_grid(j, "r_grid", c.r_grid);
  c.theta_grid = get_grid(j, "theta_grid", c.theta_grid);
  c.replicates = get_u64(j, "replicates", c.replicates, "config");
  c.seed = get_u64(j, "seed", c.seed, "config");
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    require_object(t, "tolerances");
    allow_keys(t, "tolerances",
               {"ode_rel_tol", "ode_abs_tol", "quad_points", "inversion_eps", "inversion_ode_rel_tol"});
    c.solver.ode_rel_tol = get_double(t, "ode_rel_tol", c.solver.ode_rel_tol, "tolerances");
    c.solver.ode_abs_tol = get_double(t, "ode_abs_tol", c.solver.ode_abs_tol, "tolerances");
    c.solver.quad_points = get_int(t, "quad_points", c.solver.quad_points, "tolerances");
    c.kernel.inversion.eps = get_double(t, "inversion_eps", c.kernel.inversion.eps, "tolerances");
    c.kernel.inversion.ode_rel_tol =
        get_double(t, "inversion_ode_rel_tol", c.kernel.inversion.ode_rel_tol, "tolerances");
  }
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    require_object(k, "kernel");
    allow_keys(k, "kernel",
               {"backend", "near_horizon_cutoff", "time_nodes", "survival_nodes", "grid_points",
                "stehfest_terms"});
    if (k.contains("backend")) {
      if (!k.at("backend").is_string()) fail(ErrorCode::kConfig, "kernel.backend: expected a string");
      c.kernel.backend = parse_backend(k.at("backend").get<std::string>());
    }
    c.kernel.near_horizon_cutoff =
        get_double(k, "near_horizon_cutoff", c.kernel.near_horizon_cutoff, "kernel");
    c.kernel.time_nodes = get_int(k, "time_nodes", c.kernel.time_nodes, "kernel");
    c.kernel.survival_nodes = get_int(k, "survival_nodes", c.kernel.survival_nodes, "kernel");
    c.kernel.inversion.grid_points = get_int(k, "grid_points", c.kernel.inversion.grid_points, "kernel");
    c.kernel.inversion.stehfest_terms =
        get_int(k, "stehfest_terms", c.kernel.inversion.stehfest_terms, "kernel");
  }
  c.backbone.max_population = get_u64(j, "population_guard", c.backbone.max_population, "config");
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    require_object(t, "thresholds");
    allow_keys(t, "thresholds",
               {"max_abs_z", "warn_z", "max_warn_fraction", "ks_alpha", "ks_min_pass_fraction"});
    c.thresholds.max_abs_z = get_double(t, "max_abs_z", c.thresholds.max_abs_z, "thresholds");
    c.thresholds.warn_z = get_double(t, "warn_z", c.thresholds.warn_z, "thresholds");
    c.thresholds.max_warn_fraction =
        get_double(t, "max_warn_fraction", c.thresholds.max_warn_fraction, "thresholds");
    c.thresholds.ks_alpha = get_double(t, "ks_alpha", c.thresholds.ks_alpha, "thresholds");
    c.thresholds.ks_min_pass_fraction =
        get_double(t, "ks_min_pass_fraction", c.thresholds.ks_min_pass_fraction, "thresholds");
  }
  if (j.contains("two_sample")) {
    const json& t = j.at("two_sample");
    require_object(t, "two_sample");
    allow_keys(t, "two_sample", {"samples", "repetitions"});
    c.ks_samples = get_u64(t, "samples", c.ks_samples, "two_sample");
    c.ks_repetitions = get_u64(t, "repetitions", c.ks_repetitions, "two_sample");
  }
  validate_config(c);
  return c;
}

ScenarioModel::ScenarioModel(const ScenarioConfig& config)
    : solver_(std::make_unique<SemigroupSolver>(config.branching, config.immigration, config.solver)),
      kernel_(std::make_unique<TransitionKernel>(*solver_, config.horizon, config.kernel)),
      simulator_(std::make_unique<BackboneSimulator>(*kernel_, config.backbone)) {}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string normalized_json(const ScenarioConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string scenario_digest(const ScenarioConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : to_json(config).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace csbp
