#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "csbp/kernels.hpp"
#include "csbp/rng.hpp"

namespace csbp {

struct Individual {
  std::uint64_t id = 0;
  /// Empty for roots (initial Poisson(lambda* x) individuals and immigrants).
  std::optional<std::uint64_t> parent;
  /// Index into BackboneForest::immigrations for immigrant roots.
  std::optional<std::size_t> immigration_event;
  double birth = 0.0;
  /// Empty when the individual is alive at the horizon.
  std::optional<double> death;
};

struct BranchEvent {
  std::uint64_t individual = 0;
  double time = 0.0;
  std::uint64_t offspring = 0;
  double graft_mass = 0.0;
};

struct ImmigrationEvent {
  double time = 0.0;
  std::uint64_t immigrants = 0;
  double graft_mass = 0.0;
};

struct BackboneForest {
  double horizon = 0.0;
  double initial_mass = 0.0;
  std::vector<Individual> individuals;
  std::vector<BranchEvent> branches;
  std::vector<ImmigrationEvent> immigrations;

  std::uint64_t alive_at_horizon() const noexcept;
};

enum class DressingSite { kLifeline, kSpine };
enum class DressingSource { kExcursion, kTiltedJump, kNearHorizonAggregate };

/// One horizon-surviving graft of a Poissonian dressing. Aggregated
/// near-horizon excursions are reported as a single record at the start of
/// the aggregated stretch.
struct DressingRecord {
  DressingSite site = DressingSite::kLifeline;
  std::optional<std::uint64_t> individual;
  double time = 0.0;
  double mass = 0.0;
  DressingSource source = DressingSource::kExcursion;
  /// Seed mass y of a tilted-jump graft; 0 otherwise.
  double seed_mass = 0.0;
};

struct JointSample {
  std::uint64_t z = 0;
  double lambda = 0.0;
};

struct BackboneOptions {
  std::uint64_t max_population = 10'000'000;
};

/// Survival-weighted seed law of a tilted jump graft: the measure
/// y^k e^{-lambda* y} (1 - e^{-y v}) M(dy), k = 1 on lifelines (M = Pi) and
/// k = 0 on the spine (M = nu).
class SeedLaw {
 public:
  SeedLaw(JumpMeasure measure, double lambda_star, int power);

  /// Total mass of the measure; v = +inf is allowed.
  double rate(double v) const;
  double sample(double v, Rng& rng) const;
  bool empty() const noexcept { return measure_.is_zero(); }

 private:
  JumpMeasure measure_;
  double lambda_star_;
  int power_;
};

/// Pathwise backbone construction of a supercritical CSBP with immigration
/// at a fixed horizon (the kernel's horizon).
class BackboneSimulator {
 public:
  explicit BackboneSimulator(const TransitionKernel& kernel, BackboneOptions options = {});

  const TransitionKernel& kernel() const noexcept { return *kernel_; }
  double horizon() const noexcept { return horizon_; }

  /// (offspring n >= 2, graft mass y) at a backbone branch point.
  std::pair<std::uint64_t, double> sample_branch_event(Rng& rng) const;
  /// (immigrants n >= 1, graft mass y) at a backbone immigration time.
  std::pair<std::uint64_t, double> sample_immigration_event(Rng& rng) const;

  BackboneForest simulate_forest(double x, Rng& rng) const;
  /// Returns (Z_t, Lambda_t); appends materialised dressing grafts to
  /// `records` when non-null.
  JointSample dress_and_mass(const BackboneForest& forest, Rng& rng,
                             std::vector<DressingRecord>* records = nullptr) const;
  JointSample sample_joint(double x, Rng& rng) const;

  /// Mass at the horizon of the dressing along the lifeline [a, b].
  double dress_lifeline(double a, double b, Rng& rng, std::optional<std::uint64_t> individual = {},
                        std::vector<DressingRecord>* records = nullptr) const;
  /// Mass at the horizon of the immigration-spine dressing over [0, t] alone.
  double sample_spine_dressing(Rng& rng, std::vector<DressingRecord>* records = nullptr) const;

  /// Intensity of horizon-surviving lifeline / spine grafts at time tau < t.
  double lifeline_intensity(double tau) const;
  double spine_intensity(double tau) const;

  /// Sums of the branch / immigration event laws before normalisation; they
  /// must equal lambda* q and phi(lambda*).
  double branch_total_weight() const noexcept { return branch_quadratic_ + branch_jump_; }
  double immigration_total_weight() const noexcept { return imm_drift_ + imm_jump_; }

 private:
  struct Component {
    double excursion_weight;
    const SeedLaw* seeds;
  };
  Component lifeline() const noexcept { return {2.0 * beta_, &life_seeds_}; }
  Component spine() const noexcept { return {delta_, &spine_seeds_}; }

  double dress(const Component& c, double g1, double g2, DressingSite site,
               std::optional<std::uint64_t> individual, Rng& rng,
               std::vector<DressingRecord>* records) const;
  double thin_excursions(const Component& c, double g1, double g2, DressingSite site,
                         std::optional<std::uint64_t> individual, Rng& rng,
                         std::vector<DressingRecord>* records) const;
  double thin_jumps(const Component& c, double g1, double g2, DressingSite site,
                    std::optional<std::uint64_t> individual, Rng& rng,
                    std::vector<DressingRecord>* records) const;

  const TransitionKernel* kernel_;
  BackboneOptions options_;
  double horizon_;
  double lambda_star_;
  double q_;
  double p_;
  double cutoff_;
  bool immigration_enabled_;

  double branch_quadratic_ = 0.0;
  double branch_jump_ = 0.0;
  double imm_drift_ = 0.0;
  double imm_jump_ = 0.0;

  double beta_;
  double delta_;
  SeedLaw life_seeds_;
  SeedLaw spine_seeds_;
};

}  // namespace csbp
