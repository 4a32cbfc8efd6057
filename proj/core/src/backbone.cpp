#include "csbp/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "csbp/error.hpp"

namespace csbp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1 - e^{-L}(1 + L), the probability that Poisson(L) is at least 2.
double at_least_two(double L) {
  if (L < 1e-4) return L * L * (0.5 - L / 3.0);
  return -std::expm1(-L) - L * std::exp(-L);
}

template <class Weight>
std::size_t pick_atom(const std::vector<Atom>& atoms, Weight weight, double total, Rng& rng) {
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    acc += weight(atoms[i]);
    if (target < acc) return i;
  }
  // Rounding can leave target a hair above the running sum.
  for (std::size_t i = atoms.size(); i-- > 0;) {
    if (weight(atoms[i]) > 0.0) return i;
  }
  fail(ErrorCode::kNumerical, "atom selection over a null measure");
}

}  // namespace

std::uint64_t BackboneForest::alive_at_horizon() const noexcept {
  return static_cast<std::uint64_t>(std::count_if(
      individuals.begin(), individuals.end(), [](const Individual& i) { return !i.death; }));
}

SeedLaw::SeedLaw(JumpMeasure measure, double lambda_star, int power)
    : measure_(std::move(measure)), lambda_star_(lambda_star), power_(power) {
  if (power_ != 0 && power_ != 1) fail(ErrorCode::kInvalidParameter, "seed law power must be 0 or 1");
}

double SeedLaw::rate(double v) const {
  if (!(v >= 0.0)) fail(ErrorCode::kDomain, "seed law needs v >= 0");
  const auto& fam = measure_.family();
  if (std::holds_alternative<NoJumps>(fam)) return 0.0;
  if (const auto* ce = std::get_if<CompoundExponential>(&fam)) {
    const double a = ce->decay + lambda_star_;
    const double cm = ce->rate * ce->decay;
    if (power_ == 0) return std::isinf(v) ? cm / a : cm * v / (a * (a + v));
    return std::isinf(v) ? cm / (a * a) : cm * v * (2.0 * a + v) / (a * a * (a + v) * (a + v));
  }
  double total = 0.0;
  for (const Atom& at : std::get<FiniteAtoms>(fam).atoms) {
    const double y = at.location;
    total += at.mass * (power_ == 1 ? y : 1.0) * std::exp(-lambda_star_ * y) * -std::expm1(-y * v);
  }
  return total;
}

double SeedLaw::sample(double v, Rng& rng) const {
  const auto& fam = measure_.family();
  if (const auto* ce = std::get_if<CompoundExponential>(&fam)) {
    const double a = ce->decay + lambda_star_;
    const double k = power_;
    if (v >= a) {
      // Accept with 1 - e^{-yv} >= 1 - e^{-a y}; rate is at least 1/2 for k = 0.
      for (;;) {
        const double y = gamma(rng, k + 1.0, 1.0 / a);
        if (uniform01(rng) < -std::expm1(-y * v)) return y;
      }
    }
    // (1 - e^{-yv}) / (yv) <= 1 folds one power of y into the proposal.
    for (;;) {
      const double y = gamma(rng, k + 2.0, 1.0 / a);
      if (uniform01(rng) * y * v < -std::expm1(-y * v)) return y;
    }
  }
  if (const auto* fa = std::get_if<FiniteAtoms>(&fam)) {
    auto weight = [&](const Atom& at) {
      return at.mass * (power_ == 1 ? at.location : 1.0) * std::exp(-lambda_star_ * at.location) *
             -std::expm1(-at.location * v);
    };
    return fa->atoms[pick_atom(fa->atoms, weight, rate(v), rng)].location;
  }
  fail(ErrorCode::kInvariantViolation, "seed law sampled from a null measure");
}

BackboneSimulator::BackboneSimulator(const TransitionKernel& kernel, BackboneOptions options)
    : kernel_(&kernel),
      options_(options),
      horizon_(kernel.horizon()),
      lambda_star_(kernel.solver().lambda_star()),
      q_(kernel.solver().diagnostics().q),
      p_(kernel.solver().diagnostics().p),
      cutoff_(kernel.near_horizon_cutoff()),
      immigration_enabled_(!kernel.solver().immigration().disabled()),
      beta_(kernel.solver().mechanism().beta),
      delta_(kernel.solver().immigration().delta),
      life_seeds_(kernel.solver().mechanism().pi, kernel.solver().lambda_star(), 1),
      spine_seeds_(kernel.solver().immigration().nu, kernel.solver().lambda_star(), 0) {
  if (options_.max_population == 0) fail(ErrorCode::kInvalidParameter, "population guard must be > 0");
  const double ls = lambda_star_;
  branch_quadratic_ = beta_ * ls * ls;
  const auto& pi = kernel.solver().mechanism().pi.family();
  if (const auto* ce = std::get_if<CompoundExponential>(&pi)) {
    const double a = ce->decay + ls;
    const double rho = ls / a;
    branch_jump_ = ce->rate * ce->decay / a * rho * rho / (1.0 - rho);
  } else if (const auto* fa = std::get_if<FiniteAtoms>(&pi)) {
    for (const Atom& at : fa->atoms) branch_jump_ += at.mass * at_least_two(ls * at.location);
  }
  imm_drift_ = delta_ * ls;
  const auto& nu = kernel.solver().immigration().nu.family();
  if (const auto* ce = std::get_if<CompoundExponential>(&nu)) {
    const double a = ce->decay + ls;
    const double rho = ls / a;
    imm_jump_ = ce->rate * ce->decay / a * rho / (1.0 - rho);
  } else if (const auto* fa = std::get_if<FiniteAtoms>(&nu)) {
    for (const Atom& at : fa->atoms) imm_jump_ += at.mass * -std::expm1(-ls * at.location);
  }
}

std::pair<std::uint64_t, double> BackboneSimulator::sample_branch_event(Rng& rng) const {
  const double total = branch_total_weight();
  if (!(total > 0.0)) fail(ErrorCode::kInvariantViolation, "backbone branching rate is zero");
  if (uniform01(rng) * total < branch_quadratic_) return {2, 0.0};
  const double ls = lambda_star_;
  const auto& pi = kernel_->solver().mechanism().pi.family();
  if (const auto* ce = std::get_if<CompoundExponential>(&pi)) {
    // Weight of n is proportional to rho^n; y | n is Gamma(n + 1, 1/a).
    const double a = ce->decay + ls;
    const std::uint64_t n = 2 + geometric(rng, 1.0 - ls / a);
    return {n, gamma(rng, static_cast<double>(n) + 1.0, 1.0 / a)};
  }
  if (const auto* fa = std::get_if<FiniteAtoms>(&pi)) {
    auto weight = [&](const Atom& at) { return at.mass * at_least_two(ls * at.location); };
    const Atom& at = fa->atoms[pick_atom(fa->atoms, weight, branch_jump_, rng)];
    return {poisson_at_least(rng, ls * at.location, 2), at.location};
  }
  return {2, 0.0};
}

std::pair<std::uint64_t, double> BackboneSimulator::sample_immigration_event(Rng& rng) const {
  if (!immigration_enabled_) {
    fail(ErrorCode::kImmigrationDisabled, "immigration event requested with phi = 0");
  }
  const double total = immigration_total_weight();
  if (uniform01(rng) * total < imm_drift_) return {1, 0.0};
  const double ls = lambda_star_;
  const auto& nu = kernel_->solver().immigration().nu.family();
  if (const auto* ce = std::get_if<CompoundExponential>(&nu)) {
    const double a = ce->decay + ls;
    const std::uint64_t n = 1 + geometric(rng, 1.0 - ls / a);
    return {n, gamma(rng, static_cast<double>(n) + 1.0, 1.0 / a)};
  }
  if (const auto* fa = std::get_if<FiniteAtoms>(&nu)) {
    auto weight = [&](const Atom& at) { return at.mass * -std::expm1(-ls * at.location); };
    const Atom& at = fa->atoms[pick_atom(fa->atoms, weight, imm_jump_, rng)];
    return {poisson_at_least(rng, ls * at.location, 1), at.location};
  }
  return {1, 0.0};
}

BackboneForest BackboneSimulator::simulate_forest(double x, Rng& rng) const {
  if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::kDomain, "initial mass must be finite and >= 0");
  BackboneForest forest;
  forest.horizon = horizon_;
  forest.initial_mass = x;
  auto& people = forest.individuals;
  auto guard = [&] {
    if (people.size() > options_.max_population) {
      fail(ErrorCode::kPopulationBlowup,
           "backbone exceeded " + std::to_string(options_.max_population) +
               " individuals; supercritical blow-up, horizon too large");
    }
  };

  const std::uint64_t roots = x > 0.0 ? poisson(rng, lambda_star_ * x) : 0;
  for (std::uint64_t i = 0; i < roots; ++i) {
    people.push_back({people.size(), std::nullopt, std::nullopt, 0.0, std::nullopt});
    guard();
  }
  if (p_ > 0.0) {
    double tau = 0.0;
    for (;;) {
      tau += exponential(rng, 1.0 / p_);
      if (tau >= horizon_) break;
      const auto [n, y] = sample_immigration_event(rng);
      const std::size_t event = forest.immigrations.size();
      forest.immigrations.push_back({tau, n, y});
      for (std::uint64_t i = 0; i < n; ++i) {
        people.push_back({people.size(), std::nullopt, event, tau, std::nullopt});
        guard();
      }
    }
  }
  for (std::size_t i = 0; i < people.size(); ++i) {
    const double end = people[i].birth + exponential(rng, 1.0 / q_);
    if (end >= horizon_) continue;
    people[i].death = end;
    const std::uint64_t id = people[i].id;
    const auto [n, y] = sample_branch_event(rng);
    forest.branches.push_back({id, end, n, y});
    for (std::uint64_t k = 0; k < n; ++k) {
      people.push_back({people.size(), id, std::nullopt, end, std::nullopt});
      guard();
    }
  }
  return forest;
}

double BackboneSimulator::thin_excursions(const Component& c, double g1, double g2,
                                          DressingSite site, std::optional<std::uint64_t> individual,
                                          Rng& rng, std::vector<DressingRecord>* records) const {
  double total = 0.0;
  // v* is decreasing in the gap, so v*(lo) dominates on [lo, 2 lo] and the
  // acceptance rate stays near 1/2 or better.
  for (double lo = g1; lo < g2;) {
    const double hi = std::min(2.0 * lo, g2);
    const double vmax = kernel_->survival_mass(lo);
    const std::uint64_t count = poisson(rng, c.excursion_weight * vmax * (hi - lo));
    for (std::uint64_t k = 0; k < count; ++k) {
      const double s = lo + (hi - lo) * uniform01(rng);
      const double v = kernel_->survival_mass(s);
      if (v > vmax * (1.0 + 1e-9)) {
        fail(ErrorCode::kNumerical, "dressing intensity exceeds its dominating bound");
      }
      if (uniform01(rng) * vmax >= v) continue;
      const double mass = kernel_->sample_nstar_mass(s, rng);
      total += mass;
      if (records) {
        records->push_back({site, individual, horizon_ - s, mass, DressingSource::kExcursion, 0.0});
      }
    }
    lo = hi;
  }
  return total;
}

double BackboneSimulator::thin_jumps(const Component& c, double g1, double g2, DressingSite site,
                                     std::optional<std::uint64_t> individual, Rng& rng,
                                     std::vector<DressingRecord>* records) const {
  double total = 0.0;
  // The jump intensity stays finite at gap 0, so one block covers [g1, cutoff].
  for (double lo = g1; lo < g2;) {
    const double hi = lo < cutoff_ ? std::min(cutoff_, g2) : std::min(2.0 * lo, g2);
    const double bound = c.seeds->rate(lo == 0.0 ? kInf : kernel_->survival_mass(lo));
    const std::uint64_t count = bound > 0.0 ? poisson(rng, bound * (hi - lo)) : 0;
    for (std::uint64_t k = 0; k < count; ++k) {
      const double s = lo + (hi - lo) * uniform01(rng);
      const double v = kernel_->survival_mass(s);
      const double rate = c.seeds->rate(v);
      if (rate > bound * (1.0 + 1e-9)) {
        fail(ErrorCode::kNumerical, "dressing intensity exceeds its dominating bound");
      }
      if (uniform01(rng) * bound >= rate) continue;
      const double y = c.seeds->sample(v, rng);
      const double mass = kernel_->sample_transition_positive(y, s, rng);
      total += mass;
      if (records) {
        records->push_back({site, individual, horizon_ - s, mass, DressingSource::kTiltedJump, y});
      }
    }
    lo = hi;
  }
  return total;
}

double BackboneSimulator::dress(const Component& c, double g1, double g2, DressingSite site,
                                std::optional<std::uint64_t> individual, Rng& rng,
                                std::vector<DressingRecord>* records) const {
  double total = 0.0;
  if (c.excursion_weight > 0.0) {
    if (g1 < cutoff_) {
      const double top = std::min(g2, cutoff_);
      const double mass = kernel_->sample_nstar_aggregate(c.excursion_weight, g1, top, rng);
      total += mass;
      if (records && mass > 0.0) {
        records->push_back(
            {site, individual, horizon_ - top, mass, DressingSource::kNearHorizonAggregate, 0.0});
      }
    }
    if (g2 > cutoff_) {
      total += thin_excursions(c, std::max(g1, cutoff_), g2, site, individual, rng, records);
    }
  }
  if (!c.seeds->empty()) total += thin_jumps(c, g1, g2, site, individual, rng, records);
  return total;
}

double BackboneSimulator::dress_lifeline(double a, double b, Rng& rng,
                                         std::optional<std::uint64_t> individual,
                                         std::vector<DressingRecord>* records) const {
  if (!(a >= 0.0) || !(b >= a) || !(b <= horizon_)) {
    fail(ErrorCode::kDomain, "lifeline must satisfy 0 <= a <= b <= t");
  }
  return dress(lifeline(), horizon_ - b, horizon_ - a, DressingSite::kLifeline, individual, rng,
               records);
}

double BackboneSimulator::sample_spine_dressing(Rng& rng,
                                                std::vector<DressingRecord>* records) const {
  if (!immigration_enabled_) return 0.0;
  return dress(spine(), 0.0, horizon_, DressingSite::kSpine, std::nullopt, rng, records);
}

double BackboneSimulator::lifeline_intensity(double tau) const {
  const double v = kernel_->survival_mass(horizon_ - tau);
  return 2.0 * beta_ * v + life_seeds_.rate(v);
}

double BackboneSimulator::spine_intensity(double tau) const {
  const double v = kernel_->survival_mass(horizon_ - tau);
  return delta_ * v + spine_seeds_.rate(v);
}

JointSample BackboneSimulator::dress_and_mass(const BackboneForest& forest, Rng& rng,
                                              std::vector<DressingRecord>* records) const {
  if (forest.horizon != horizon_) fail(ErrorCode::kDomain, "forest horizon differs from the kernel's");
  double mass = 0.0;
  if (forest.initial_mass > 0.0) mass += kernel_->sample_transition(forest.initial_mass, horizon_, rng);
  for (const BranchEvent& e : forest.branches) {
    if (e.graft_mass > 0.0) mass += kernel_->sample_transition(e.graft_mass, horizon_ - e.time, rng);
  }
  for (const ImmigrationEvent& e : forest.immigrations) {
    if (e.graft_mass > 0.0) mass += kernel_->sample_transition(e.graft_mass, horizon_ - e.time, rng);
  }
  for (const Individual& ind : forest.individuals) {
    mass += dress_lifeline(ind.birth, ind.death.value_or(horizon_), rng, ind.id, records);
  }
  mass += sample_spine_dressing(rng, records);
  return {forest.alive_at_horizon(), mass};
}

JointSample BackboneSimulator::sample_joint(double x, Rng& rng) const {
  const BackboneForest forest = simulate_forest(x, rng);
  return dress_and_mass(forest, rng);
}

}  // namespace csbp
