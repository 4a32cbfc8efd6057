#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csbp/backbone.hpp"
#include "csbp/rng.hpp"
#include "csbp/semigroup.hpp"

namespace csbp {

/// Neumaier-compensated running sum. Adding in a fixed order gives a fixed
/// result.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error (sample sd / sqrt(n)), compensated sums.
MeanEstimate estimate_mean(std::span<const double> values);

/// (estimate - target) / se; with se = 0 it is 0 on an exact match and
/// +-inf otherwise.
double z_score(double estimate, double target, double se);

struct Thresholds {
  double max_abs_z = 4.0;
  double warn_z = 2.0;
  double max_warn_fraction = 0.1;
  double ks_alpha = 0.01;
  /// Fraction of seeded KS repetitions that must have p > ks_alpha.
  double ks_min_pass_fraction = 0.95;
};

/// Familywise rule: every |z| below max_abs_z and at most max_warn_fraction
/// of them above warn_z.
bool judge(std::span<const double> z, const Thresholds& th);

struct McRow {
  double r = 0.0;
  double theta = 0.0;
  double target = 0.0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
  std::size_t n = 0;
};

struct McReport {
  std::vector<McRow> rows;
  std::string digest;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  std::vector<double> z_scores() const;
  bool passed(const Thresholds& th) const { return judge(z_scores(), th); }
};

/// Draws (Z_t, Lambda_t) for replicates [0, n) from make_stream(seed, i).
std::vector<JointSample> sample_joint_batch(const BackboneSimulator& sim, double x, std::size_t n,
                                            std::uint64_t seed, unsigned threads);

/// Empirical E[r^Z e^{-theta Lambda}] on the grid against `target(r, theta)`.
McReport laplace_report(std::span<const JointSample> samples, std::span<const double> r_grid,
                        std::span<const double> theta_grid,
                        const std::function<double(double, double)>& target);

/// Simulates n joint samples and reports against joint_backbone_laplace.
McReport mc_joint_laplace(const BackboneSimulator& sim, double x, std::span<const double> r_grid,
                          std::span<const double> theta_grid, std::size_t n, std::uint64_t seed,
                          unsigned threads);

struct PairedRow {
  double r = 0.0;
  double theta = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
  std::size_t n = 0;
  /// SE of the difference of the two functionals treated as independent
  /// estimates on the same n; the paired design must beat it.
  double independent_stderr = 0.0;
};

/// Paired differences r^{Z_i} e^{-theta L_i} - e^{-(theta + lambda*(1-r)) L_i}.
PairedRow poissonization_check(std::span<const JointSample> samples, double lambda_star, double r,
                               double theta);

/// Exact X_t sampler for a quadratic mechanism with drift-only immigration:
/// X_t = Gamma(delta/beta, C) + Gamma(M, C), M ~ Poisson(x e^{qt} / C),
/// C = beta (e^{qt} - 1) / q.
class DirectCbiSampler {
 public:
  explicit DirectCbiSampler(const SemigroupSolver& solver);
  double sample(double x, double t, Rng& rng) const;

 private:
  double q_;
  double beta_;
  double delta_;
};

struct KsResult {
  /// Sup distance between the empirical CDFs of the positive parts.
  double statistic = 0.0;
  double ks_p_value = 1.0;
  /// Two-proportion z-test on the atoms at 0.
  double atom_p_value = 1.0;
  /// Bonferroni combination of the two p-values.
  double p_value = 1.0;
  double atom_fraction_a = 0.0;
  double atom_fraction_b = 0.0;
};

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_tail(double lambda);

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Seed for an independent sub-experiment `tag` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag);

struct TwoSampleSummary {
  std::size_t repetitions = 0;
  std::size_t passes = 0;
  std::vector<double> p_values;
};

/// Repeats the two-sample test of n Lambda_t draws against n direct X_t
/// draws; repetition k is seeded from derive_seed(seed, 2k + 1) and
/// derive_seed(seed, 2k + 2). A repetition passes when p > alpha.
TwoSampleSummary two_sample_repetitions(const BackboneSimulator& sim, const DirectCbiSampler& direct,
                                        double x, std::size_t n, std::size_t repetitions,
                                        std::uint64_t seed, unsigned threads, double alpha);

}  // namespace csbp
