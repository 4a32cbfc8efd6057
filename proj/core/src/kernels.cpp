#include "csbp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csbp/error.hpp"

namespace csbp {
namespace {

constexpr double kRejectionThreshold = 0.1;

std::vector<double> geometric_nodes(double lo, double hi, int count) {
  if (count <= 1 || hi <= lo) return {hi};
  std::vector<double> nodes(static_cast<std::size_t>(count));
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) nodes[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  nodes.front() = lo;
  nodes.back() = hi;
  return nodes;
}

}  // namespace

std::string_view backend_name(KernelBackend backend) noexcept {
  switch (backend) {
    case KernelBackend::kAuto: return "auto";
    case KernelBackend::kQuadraticExact: return "quadratic-exact";
    case KernelBackend::kGenericInversion: return "generic-inversion";
  }
  return "auto";
}

KernelBackend parse_backend(std::string_view name) {
  if (name == "auto") return KernelBackend::kAuto;
  if (name == "quadratic-exact") return KernelBackend::kQuadraticExact;
  if (name == "generic-inversion") return KernelBackend::kGenericInversion;
  fail(ErrorCode::kConfig, "unknown kernel backend '" + std::string(name) + "'");
}

TransitionKernel::TransitionKernel(const SemigroupSolver& solver, double horizon,
                                   KernelOptions options)
    : solver_(&solver),
      horizon_(horizon),
      options_(options),
      backend_(options.backend),
      q_(solver.diagnostics().q),
      beta_(solver.mechanism().beta) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    fail(ErrorCode::kDomain, "kernel horizon must be finite and > 0");
  }
  if (!(options_.near_horizon_cutoff > 0.0)) {
    fail(ErrorCode::kInvalidParameter, "near-horizon cutoff must be > 0");
  }
  if (beta_ <= 0.0) {
    fail(ErrorCode::kCapability,
         "transition samplers need beta > 0: without a quadratic term the conditioned process "
         "never reaches zero and no supported backend applies");
  }
  const bool quadratic = solver.mechanism().pi.is_zero();
  if (backend_ == KernelBackend::kAuto) {
    backend_ = quadratic ? KernelBackend::kQuadraticExact : KernelBackend::kGenericInversion;
  }
  if (backend_ == KernelBackend::kQuadraticExact && !quadratic) {
    fail(ErrorCode::kCapability, "quadratic-exact backend requires a jump-free mechanism");
  }
  if (backend_ == KernelBackend::kQuadraticExact) return;

  const double s_min = std::min(options_.near_horizon_cutoff, horizon_);
  survival_s_ = geometric_nodes(s_min, horizon_, options_.survival_nodes);
  survival_log_v_.reserve(survival_s_.size());
  for (double s : survival_s_) survival_log_v_.push_back(std::log(solver.survival_v_star(s)));

  std::vector<double> nodes = geometric_nodes(s_min, horizon_, options_.time_nodes);
  std::vector<double> survival;
  survival.reserve(nodes.size());
  for (double s : nodes) survival.push_back(solver.survival_v_star(s));
  table_ = std::make_shared<const NStarMassTable>(solver.tilted(), std::move(nodes),
                                                  std::move(survival), options_.inversion);
}

double TransitionKernel::quadratic_scale(double s) const {
  return (beta_ / q_) * -std::expm1(-q_ * s);
}

double TransitionKernel::survival_mass(double s) const {
  if (!(s >= 0.0)) fail(ErrorCode::kDomain, "survival mass needs s >= 0");
  if (s == 0.0) return std::numeric_limits<double>::infinity();
  if (backend_ == KernelBackend::kQuadraticExact) return q_ / (beta_ * std::expm1(q_ * s));
  if (s > horizon_ * (1.0 + 1e-12)) fail(ErrorCode::kDomain, "gap beyond the tabulated horizon");
  const auto& xs = survival_s_;
  const auto& ys = survival_log_v_;
  if (xs.size() == 1) {
    // Single node: v*_s ~ 1/(beta s) scaling.
    return std::exp(ys[0]) * xs[0] / s;
  }
  std::size_t k;
  if (s <= xs.front()) {
    k = 0;
  } else if (s >= xs.back()) {
    k = xs.size() - 2;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), s) - xs.begin()) - 1;
  }
  const double a = std::log(s / xs[k]) / std::log(xs[k + 1] / xs[k]);
  return std::exp(ys[k] + a * (ys[k + 1] - ys[k]));
}

double TransitionKernel::nstar_mean(double s) const {
  return std::exp(-q_ * s) / survival_mass(s);
}

double TransitionKernel::survival_probability(double y, double s) const {
  if (y == 0.0) return 0.0;
  return -std::expm1(-y * survival_mass(s));
}

double TransitionKernel::transition_laplace(double y, double s, double theta) const {
  return std::exp(-y * solver_->u_star(s, theta));
}

double TransitionKernel::generic_nstar_mass(double s, Rng& rng) const {
  const double u = uniform01(rng);
  const double s_min = table_->s_nodes().front();
  if (s >= s_min) return table_->quantile(s, u);
  // Below the first node the law is close to self-similar in s.
  return table_->quantile(std::size_t{0}, u) * nstar_mean(s) / table_->node_mean(0);
}

double TransitionKernel::sample_nstar_mass(double s, Rng& rng) const {
  if (!(s > 0.0)) fail(ErrorCode::kDomain, "N* mass needs s > 0");
  if (backend_ == KernelBackend::kQuadraticExact) return exponential(rng, quadratic_scale(s));
  return generic_nstar_mass(s, rng);
}

double TransitionKernel::sum_nstar_masses(std::uint64_t count, double s, Rng& rng) const {
  if (count == 0) return 0.0;
  if (backend_ == KernelBackend::kQuadraticExact) {
    return gamma(rng, static_cast<double>(count), quadratic_scale(s));
  }
  double total = 0.0;
  for (std::uint64_t i = 0; i < count; ++i) total += generic_nstar_mass(s, rng);
  return total;
}

// Generic backend below the first tabulated gap: zero with the exact
// extinction probability, otherwise a gamma law matching the conditional
// mean and variance of P*_y at gap s.
double TransitionKernel::approximate_small_gap(double y, double s, Rng& rng) const {
  const double survive = survival_probability(y, s);
  const double mean = y * std::exp(-q_ * s);
  const double var = y * solver_->tilted().second_derivative_at_zero() * std::exp(-q_ * s) *
                     -std::expm1(-q_ * s) / q_;
  const double cond_mean = mean / survive;
  const double cond_var = std::max((var + mean * mean) / survive - cond_mean * cond_mean,
                                   1e-300);
  return gamma(rng, cond_mean * cond_mean / cond_var, cond_var / cond_mean);
}

double TransitionKernel::sample_transition(double y, double s, Rng& rng) const {
  if (!(y >= 0.0) || !std::isfinite(y)) fail(ErrorCode::kDomain, "transition needs finite y >= 0");
  if (!(s > 0.0)) fail(ErrorCode::kDomain, "transition needs s > 0");
  if (y == 0.0) return 0.0;
  if (backend_ == KernelBackend::kGenericInversion && s < table_->s_nodes().front()) {
    if (uniform01(rng) >= survival_probability(y, s)) return 0.0;
    return approximate_small_gap(y, s, rng);
  }
  const std::uint64_t count = poisson(rng, y * survival_mass(s));
  return sum_nstar_masses(count, s, rng);
}

double TransitionKernel::sample_transition_positive(double y, double s, Rng& rng) const {
  if (!(y > 0.0) || !std::isfinite(y)) fail(ErrorCode::kDomain, "conditioned transition needs y > 0");
  if (!(s > 0.0)) fail(ErrorCode::kDomain, "conditioned transition needs s > 0");
  if (backend_ == KernelBackend::kGenericInversion && s < table_->s_nodes().front()) {
    return approximate_small_gap(y, s, rng);
  }
  const double mean_count = y * survival_mass(s);
  if (-std::expm1(-mean_count) >= kRejectionThreshold) {
    for (;;) {
      const double x = sample_transition(y, s, rng);
      if (x > 0.0) return x;
    }
  }
  return sum_nstar_masses(poisson_at_least(rng, mean_count, 1), s, rng);
}

double TransitionKernel::sample_nstar_aggregate(double weight, double s1, double s2,
                                                Rng& rng) const {
  if (!(weight >= 0.0) || !(s1 >= 0.0) || !(s2 >= s1)) {
    fail(ErrorCode::kDomain, "aggregate dressing needs weight >= 0 and 0 <= s1 <= s2");
  }
  if (weight == 0.0 || s2 == s1) return 0.0;
  if (backend_ == KernelBackend::kQuadraticExact) {
    // exp(-weight int u*) = ((1 + theta c_{s1}) / (1 + theta c_{s2}))^{weight/beta}
    const double shape = weight / beta_;
    const double c2 = quadratic_scale(s2);
    if (s1 == 0.0) return gamma(rng, shape, c2);
    // Surviving excursions: Poisson(shape log(c2/c1)), log c uniform, mass Exp(c).
    const double log_c1 = std::log(quadratic_scale(s1));
    const double log_c2 = std::log(c2);
    const std::uint64_t count = poisson(rng, shape * (log_c2 - log_c1));
    double total = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) {
      const double log_c = log_c1 + (log_c2 - log_c1) * uniform01(rng);
      total += exponential(rng, std::exp(log_c));
    }
    return total;
  }
  if (s2 > options_.near_horizon_cutoff * (1.0 + 1e-12)) {
    fail(ErrorCode::kDomain, "generic aggregate dressing is only defined below the near-horizon cutoff");
  }
  // Replaced by its mean weight int e^{-q s} ds; the error is second order
  // in the cutoff.
  return weight * (std::exp(-q_ * s1) - std::exp(-q_ * s2)) / q_;
}

}  // namespace csbp
