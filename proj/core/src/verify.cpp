#include "csbp/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "csbp/error.hpp"
#include "csbp/parallel.hpp"

namespace csbp {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    carry_ += (sum_ - t) + x;
  } else {
    carry_ += (x - t) + sum_;
  }
  sum_ = t;
}

MeanEstimate estimate_mean(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kConfig, "mean of an empty sample");
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  const double n = static_cast<double>(values.size());
  const double mean = sum.value() / n;
  if (values.size() == 1) return {mean, 0.0, 1};
  CompensatedSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  return {mean, std::sqrt(sq.value() / (n - 1.0) / n), values.size()};
}

double z_score(double estimate, double target, double se) {
  const double diff = estimate - target;
  if (se > 0.0) return diff / se;
  if (std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(target))) return 0.0;
  return diff > 0.0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
}

bool judge(std::span<const double> z, const Thresholds& th) {
  if (z.empty()) return false;
  std::size_t warned = 0;
  for (double v : z) {
    if (!(std::abs(v) < th.max_abs_z)) return false;
    if (std::abs(v) > th.warn_z) ++warned;
  }
  return static_cast<double>(warned) <= th.max_warn_fraction * static_cast<double>(z.size());
}

std::vector<double> McReport::z_scores() const {
  std::vector<double> z;
  z.reserve(rows.size());
  for (const McRow& row : rows) z.push_back(row.z);
  return z;
}

std::vector<JointSample> sample_joint_batch(const BackboneSimulator& sim, double x, std::size_t n,
                                            std::uint64_t seed, unsigned threads) {
  return run_replicates<JointSample>(seed, n, threads,
                                     [&](Rng& rng, std::size_t) { return sim.sample_joint(x, rng); });
}

McReport laplace_report(std::span<const JointSample> samples, std::span<const double> r_grid,
                        std::span<const double> theta_grid,
                        const std::function<double(double, double)>& target) {
  if (r_grid.empty() || theta_grid.empty()) fail(ErrorCode::kConfig, "empty (r, theta) grid");
  if (samples.empty()) fail(ErrorCode::kConfig, "no samples to report on");
  McReport report;
  std::vector<double> values(samples.size());
  for (double r : r_grid) {
    for (double theta : theta_grid) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        values[i] = std::pow(r, static_cast<double>(samples[i].z)) * std::exp(-theta * samples[i].lambda);
      }
      const MeanEstimate est = estimate_mean(values);
      const double tgt = target(r, theta);
      report.rows.push_back({r, theta, tgt, est.mean, est.stderr_, z_score(est.mean, tgt, est.stderr_),
                             est.n});
    }
  }
  return report;
}

McReport mc_joint_laplace(const BackboneSimulator& sim, double x, std::span<const double> r_grid,
                          std::span<const double> theta_grid, std::size_t n, std::uint64_t seed,
                          unsigned threads) {
  if (n < 100) fail(ErrorCode::kConfig, "Laplace certification needs at least 100 replicates");
  if (r_grid.empty() || theta_grid.empty()) fail(ErrorCode::kConfig, "empty (r, theta) grid");
  const auto start = std::chrono::steady_clock::now();
  const auto samples = sample_joint_batch(sim, x, n, seed, threads);
  const SemigroupSolver& solver = sim.kernel().solver();
  const double t = sim.horizon();
  McReport report = laplace_report(samples, r_grid, theta_grid, [&](double r, double theta) {
    return solver.joint_backbone_laplace(x, t, r, theta);
  });
  report.seed = seed;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

PairedRow poissonization_check(std::span<const JointSample> samples, double lambda_star, double r,
                               double theta) {
  if (samples.size() < 100) fail(ErrorCode::kConfig, "poissonization check needs >= 100 samples");
  const std::size_t n = samples.size();
  std::vector<double> a(n), b(n), d(n);
  const double shifted = theta + lambda_star * (1.0 - r);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::pow(r, static_cast<double>(samples[i].z)) * std::exp(-theta * samples[i].lambda);
    b[i] = std::exp(-shifted * samples[i].lambda);
    d[i] = a[i] - b[i];
  }
  const MeanEstimate ea = estimate_mean(a);
  const MeanEstimate eb = estimate_mean(b);
  const MeanEstimate ed = estimate_mean(d);
  PairedRow row;
  row.r = r;
  row.theta = theta;
  row.mean = ed.mean;
  row.stderr_ = ed.stderr_;
  row.z = z_score(ed.mean, 0.0, ed.stderr_);
  row.n = n;
  row.independent_stderr = std::hypot(ea.stderr_, eb.stderr_);
  return row;
}

DirectCbiSampler::DirectCbiSampler(const SemigroupSolver& solver)
    : q_(solver.diagnostics().q),
      beta_(solver.mechanism().beta),
      delta_(solver.immigration().delta) {
  if (!solver.mechanism().pi.is_zero() || !(beta_ > 0.0)) {
    fail(ErrorCode::kCapability, "direct CBI sampler needs a quadratic mechanism (Pi = 0, beta > 0)");
  }
  if (!solver.immigration().nu.is_zero()) {
    fail(ErrorCode::kCapability, "direct CBI sampler supports drift-only immigration");
  }
}

double DirectCbiSampler::sample(double x, double t, Rng& rng) const {
  if (!(x >= 0.0) || !(t >= 0.0)) fail(ErrorCode::kDomain, "direct CBI sample needs x, t >= 0");
  if (t == 0.0) return x;
  const double scale = beta_ * std::expm1(q_ * t) / q_;
  double value = delta_ > 0.0 ? gamma(rng, delta_ / beta_, scale) : 0.0;
  if (x > 0.0) {
    const std::uint64_t m = poisson(rng, x * std::exp(q_ * t) / scale);
    if (m > 0) value += gamma(rng, static_cast<double>(m), scale);
  }
  return value;
}

double kolmogorov_tail(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series, fast for small lambda.
    const double pi = std::numbers::pi;
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double j = 2.0 * k - 1.0;
      sum += std::exp(-j * j * pi * pi / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double two_proportion_p(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  if (pooled <= 0.0 || pooled >= 1.0) return 1.0;
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  const double z = (static_cast<double>(k1) / n1 - static_cast<double>(k2) / n2) / se;
  return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

}  // namespace

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::kConfig, "two-sample test needs nonempty samples");
  std::vector<double> pa, pb;
  for (double v : a) {
    if (v > 0.0) pa.push_back(v);
  }
  for (double v : b) {
    if (v > 0.0) pb.push_back(v);
  }
  KsResult res;
  const std::size_t za = a.size() - pa.size();
  const std::size_t zb = b.size() - pb.size();
  res.atom_fraction_a = static_cast<double>(za) / a.size();
  res.atom_fraction_b = static_cast<double>(zb) / b.size();
  res.atom_p_value = two_proportion_p(za, a.size(), zb, b.size());

  if (!pa.empty() && !pb.empty()) {
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    const double na = static_cast<double>(pa.size());
    const double nb = static_cast<double>(pb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < pa.size() && j < pb.size()) {
      const double x = std::min(pa[i], pb[j]);
      while (i < pa.size() && pa[i] == x) ++i;
      while (j < pb.size() && pb[j] == x) ++j;
      d = std::max(d, std::abs(i / na - j / nb));
    }
    res.statistic = d;
    const double ne = na * nb / (na + nb);
    const double root = std::sqrt(ne);
    res.ks_p_value = kolmogorov_tail((root + 0.12 + 0.11 / root) * d);
  }
  res.p_value = std::min(1.0, 2.0 * std::min(res.atom_p_value, res.ks_p_value));
  return res;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  std::uint64_t state = master ^ (tag * 0x9E3779B97F4A7C15ull);
  return splitmix64(state);
}

TwoSampleSummary two_sample_repetitions(const BackboneSimulator& sim, const DirectCbiSampler& direct,
                                        double x, std::size_t n, std::size_t repetitions,
                                        std::uint64_t seed, unsigned threads, double alpha) {
  TwoSampleSummary out;
  out.repetitions = repetitions;
  const double t = sim.horizon();
  for (std::size_t k = 0; k < repetitions; ++k) {
    const auto joint = sample_joint_batch(sim, x, n, derive_seed(seed, 2 * k + 1), threads);
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = joint[i].lambda;
    const auto b = run_replicates<double>(derive_seed(seed, 2 * k + 2), n, threads,
                                          [&](Rng& rng, std::size_t) { return direct.sample(x, t, rng); });
    const KsResult res = ks_two_sample(a, b);
    out.p_values.push_back(res.p_value);
    if (res.p_value > alpha) ++out.passes;
  }
  return out;
}

}  // namespace csbp
