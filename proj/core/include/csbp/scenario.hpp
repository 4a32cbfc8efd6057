#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "csbp/backbone.hpp"
#include "csbp/kernels.hpp"
#include "csbp/mechanisms.hpp"
#include "csbp/semigroup.hpp"
#include "csbp/verify.hpp"

namespace csbp {

/// Everything needed to reproduce a run. Loaded from a JSON document; every
/// field has a default, and the normalized form lists them all.
struct ScenarioConfig {
  BranchingMechanism branching{-1.0, 1.0, JumpMeasure::zero()};
  ImmigrationMechanism immigration{1.0, JumpMeasure::zero()};
  double x = 1.0;
  double horizon = 1.0;
  std::vector<double> r_grid{0.0, 0.5, 1.0};
  std::vector<double> theta_grid{0.0, 0.5, 1.0, 2.0};
  std::uint64_t replicates = 100000;
  std::uint64_t seed = 20240601;
  SolverOptions solver;
  KernelOptions kernel;
  BackboneOptions backbone;
  Thresholds thresholds;
  /// Two-sample check run by `verify`: sample size per side and number of
  /// seeded repetitions (0 disables it).
  std::uint64_t ks_samples = 10000;
  std::uint64_t ks_repetitions = 1;
};

/// Parses and validates; unknown keys and bad values raise kConfig, invalid
/// mechanisms raise their validation codes.
ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::string& path);

/// Pretty-printed JSON with every field explicit. parse(normalized(c))
/// normalizes back to the same text.
std::string normalized_json(const ScenarioConfig& config);

/// Solver, kernel and simulator built from a config. The kernel and the
/// simulator refer to the solver, so the model is neither copied nor moved.
class ScenarioModel {
 public:
  explicit ScenarioModel(const ScenarioConfig& config);
  ScenarioModel(const ScenarioModel&) = delete;
  ScenarioModel& operator=(const ScenarioModel&) = delete;

  const SemigroupSolver& solver() const noexcept { return *solver_; }
  const TransitionKernel& kernel() const noexcept { return *kernel_; }
  const BackboneSimulator& simulator() const noexcept { return *simulator_; }

 private:
  std::unique_ptr<SemigroupSolver> solver_;
  std::unique_ptr<TransitionKernel> kernel_;
  std::unique_ptr<BackboneSimulator> simulator_;
};

/// FNV-1a 64 of the compact normalized JSON, as 16 hex digits.
std::string scenario_digest(const ScenarioConfig& config);

}  // namespace csbp
