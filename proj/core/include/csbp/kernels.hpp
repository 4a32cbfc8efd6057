#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "csbp/laplace_inversion.hpp"
#include "csbp/rng.hpp"
#include "csbp/semigroup.hpp"

namespace csbp {

enum class KernelBackend { kAuto, kQuadraticExact, kGenericInversion };

std::string_view backend_name(KernelBackend backend) noexcept;
KernelBackend parse_backend(std::string_view name);

struct KernelOptions {
  KernelBackend backend = KernelBackend::kAuto;
  /// Gaps s below this are "near the horizon": the generic backend does not
  /// tabulate them and uses moment-matched approximations there.
  double near_horizon_cutoff = 1e-3;
  int time_nodes = 48;
  int survival_nodes = 512;
  InversionOptions inversion;
};

/// Samplers for the graft ingredients of the backbone construction, all built
/// on the conditioned (psi*, 0)-CSBP:
///   - transition from mass y over a gap s (law P*_y),
///   - the same transition conditioned positive,
///   - the N* excursion mass at gap s conditioned positive,
///   - the aggregated mass of an N*-dressing over a range of gaps.
/// A P*_y draw is a Poisson(y v*_s) sum of conditioned excursion masses, so
/// the backends differ only in how they produce excursion masses.
///
/// Immutable after construction; sampling uses the caller's RNG.
class TransitionKernel {
 public:
  /// `horizon` bounds the gaps the generic backend tabulates.
  TransitionKernel(const SemigroupSolver& solver, double horizon, KernelOptions options = {});

  KernelBackend backend() const noexcept { return backend_; }
  const SemigroupSolver& solver() const noexcept { return *solver_; }
  double horizon() const noexcept { return horizon_; }
  double near_horizon_cutoff() const noexcept { return options_.near_horizon_cutoff; }

  double sample_transition(double y, double s, Rng& rng) const;
  double sample_transition_positive(double y, double s, Rng& rng) const;
  double sample_nstar_mass(double s, Rng& rng) const;

  /// Mass at the horizon of a Poissonian N*-dressing with rate `weight` over
  /// gaps [s1, s2]: Laplace transform exp(-weight int_{s1}^{s2} u*_s(theta) ds).
  double sample_nstar_aggregate(double weight, double s1, double s2, Rng& rng) const;

  /// e^{-y u*_s(theta)}, evaluated by the semigroup solver (the sampler oracle).
  double transition_laplace(double y, double s, double theta) const;

  /// v*_s. Closed form (quadratic) or log-log interpolation on a grid of
  /// exact values (generic); +inf at s = 0.
  double survival_mass(double s) const;
  /// N*[X_s | X_s > 0] = e^{-q s} / v*_s
  double nstar_mean(double s) const;
  /// P*_y(X_s > 0) = 1 - e^{-y v*_s}
  double survival_probability(double y, double s) const;

  /// Inversion table (generic backend only, nullptr otherwise).
  const NStarMassTable* table() const noexcept { return table_.get(); }

 private:
  double quadratic_scale(double s) const;
  double generic_nstar_mass(double s, Rng& rng) const;
  double sum_nstar_masses(std::uint64_t count, double s, Rng& rng) const;
  double approximate_small_gap(double y, double s, Rng& rng) const;

  const SemigroupSolver* solver_;
  double horizon_;
  KernelOptions options_;
  KernelBackend backend_;
  double q_;
  double beta_;

  std::vector<double> survival_s_;
  std::vector<double> survival_log_v_;
  std::shared_ptr<const NStarMassTable> table_;
};

}  // namespace csbp
