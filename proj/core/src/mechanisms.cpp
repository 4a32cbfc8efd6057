#include "csbp/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csbp/error.hpp"

namespace csbp {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    fail(ErrorCode::kInvalidParameter, std::string(what) + " must be finite");
  }
}

void require_nonnegative_argument(double lam, const char* fn) {
  if (!(lam >= 0.0)) {
    fail(ErrorCode::kDomain, std::string(fn) + ": argument must be >= 0, got " + std::to_string(lam));
  }
}

// psi without the public domain check; the tilted mechanism evaluates it at
// lam + lambda* for lam slightly below zero.
double psi_unchecked(const BranchingMechanism& mech, double lam) {
  return mech.alpha * lam + mech.beta * lam * lam - mech.pi.tilted_laplace(0.0, lam) +
         lam * mech.pi.small_jump_mean();
}

}  // namespace

JumpMeasure JumpMeasure::zero() { return JumpMeasure(NoJumps{}); }

JumpMeasure JumpMeasure::compound_exponential(double rate, double decay) {
  require_finite(rate, "compound exponential rate");
  require_finite(decay, "compound exponential decay");
  if (rate <= 0.0 || decay <= 0.0) {
    fail(ErrorCode::kInvalidParameter, "compound exponential rate and decay must be > 0");
  }
  return JumpMeasure(CompoundExponential{rate, decay});
}

JumpMeasure JumpMeasure::finite_atoms(std::vector<Atom> atoms) {
  if (atoms.empty()) {
    fail(ErrorCode::kInvalidParameter, "finite atoms measure needs at least one atom");
  }
  for (const Atom& a : atoms) {
    require_finite(a.location, "atom location");
    require_finite(a.mass, "atom mass");
    if (a.location <= 0.0 || a.mass <= 0.0) {
      fail(ErrorCode::kInvalidParameter, "atom locations and masses must be > 0");
    }
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& l, const Atom& r) { return l.location < r.location; });
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    if (atoms[i].location == atoms[i - 1].location) {
      fail(ErrorCode::kInvalidParameter, "atom locations must be distinct");
    }
  }
  return JumpMeasure(FiniteAtoms{std::move(atoms)});
}

bool JumpMeasure::is_zero() const noexcept { return std::holds_alternative<NoJumps>(family_); }

double JumpMeasure::tilted_laplace(double a, double lam) const {
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const CompoundExponential& ce) {
            const double lo = ce.decay + a;
            const double hi = lo + lam;
            if (lo <= 0.0 || hi <= 0.0) {
              fail(ErrorCode::kDomain, "exponential jump integral diverges for this tilt");
            }
            return ce.rate * ce.decay * lam / (lo * hi);
          },
          [&](const FiniteAtoms& fa) {
            double sum = 0.0;
            for (const Atom& at : fa.atoms) {
              sum += at.mass * std::exp(-a * at.location) * -std::expm1(-lam * at.location);
            }
            return sum;
          },
      },
      family_);
}

double JumpMeasure::tilted_mass(double a) const {
  return std::visit(Overloaded{
                        [](const NoJumps&) { return 0.0; },
                        [&](const CompoundExponential& ce) {
                          return ce.rate * ce.decay / (ce.decay + a);
                        },
                        [&](const FiniteAtoms& fa) {
                          double sum = 0.0;
                          for (const Atom& at : fa.atoms) sum += at.mass * std::exp(-a * at.location);
                          return sum;
                        },
                    },
                    family_);
}

double JumpMeasure::tilted_first_moment(double a) const {
  return std::visit(Overloaded{
                        [](const NoJumps&) { return 0.0; },
                        [&](const CompoundExponential& ce) {
                          const double k = ce.decay + a;
                          return ce.rate * ce.decay / (k * k);
                        },
                        [&](const FiniteAtoms& fa) {
                          double sum = 0.0;
                          for (const Atom& at : fa.atoms) {
                            sum += at.mass * at.location * std::exp(-a * at.location);
                          }
                          return sum;
                        },
                    },
                    family_);
}

double JumpMeasure::tilted_second_moment(double a) const {
  return std::visit(Overloaded{
                        [](const NoJumps&) { return 0.0; },
                        [&](const CompoundExponential& ce) {
                          const double k = ce.decay + a;
                          return 2.0 * ce.rate * ce.decay / (k * k * k);
                        },
                        [&](const FiniteAtoms& fa) {
                          double sum = 0.0;
                          for (const Atom& at : fa.atoms) {
                            sum += at.mass * at.location * at.location * std::exp(-a * at.location);
                          }
                          return sum;
                        },
                    },
                    family_);
}

double JumpMeasure::small_jump_mean() const {
  return std::visit(Overloaded{
                        [](const NoJumps&) { return 0.0; },
                        [](const CompoundExponential& ce) {
                          const double m = ce.decay;
                          return ce.rate * (-std::expm1(-m) - m * std::exp(-m)) / m;
                        },
                        [](const FiniteAtoms& fa) {
                          double sum = 0.0;
                          for (const Atom& at : fa.atoms) {
                            if (at.location < 1.0) sum += at.mass * at.location;
                          }
                          return sum;
                        },
                    },
                    family_);
}

double JumpMeasure::large_jump_mean() const {
  return std::visit(Overloaded{
                        [](const NoJumps&) { return 0.0; },
                        [](const CompoundExponential& ce) {
                          const double m = ce.decay;
                          return ce.rate * std::exp(-m) * (1.0 + m) / m;
                        },
                        [](const FiniteAtoms& fa) {
                          double sum = 0.0;
                          for (const Atom& at : fa.atoms) {
                            if (at.location >= 1.0) sum += at.mass * at.location;
                          }
                          return sum;
                        },
                    },
                    family_);
}

double psi(const BranchingMechanism& mech, double lam) {
  require_nonnegative_argument(lam, "psi");
  return psi_unchecked(mech, lam);
}

double psi_prime(const BranchingMechanism& mech, double lam) {
  require_nonnegative_argument(lam, "psi_prime");
  return mech.alpha + 2.0 * mech.beta * lam + mech.pi.small_jump_mean() -
         mech.pi.tilted_first_moment(lam);
}

double phi(const ImmigrationMechanism& imm, double lam) {
  require_nonnegative_argument(lam, "phi");
  return imm.delta * lam + imm.nu.tilted_laplace(0.0, lam);
}

void validate_branching(const BranchingMechanism& mech) {
  require_finite(mech.alpha, "alpha");
  require_finite(mech.beta, "beta");
  if (mech.beta < 0.0) fail(ErrorCode::kInvalidParameter, "beta must be >= 0");
  if (mech.beta == 0.0 && mech.pi.is_zero()) {
    fail(ErrorCode::kLinearMechanism, "beta = 0 and no jumps: psi is linear and has no positive root");
  }
  const double slope = mech.alpha - mech.pi.large_jump_mean();
  if (!(slope < 0.0)) {
    fail(ErrorCode::kNotSupercritical,
         "not supercritical: psi'(0+) = " + std::to_string(slope) + " must be < 0");
  }
}

void validate_immigration(const ImmigrationMechanism& imm) {
  require_finite(imm.delta, "delta");
  if (imm.delta < 0.0) fail(ErrorCode::kInvalidParameter, "delta must be >= 0");
}

double lambda_star(const BranchingMechanism& mech) {
  validate_branching(mech);

  constexpr int kMaxIterations = 200;
  auto f = [&](double lam) { return psi_unchecked(mech, lam); };

  // psi is convex, negative on (0, lambda*), positive beyond.
  double hi = 1.0;
  int iterations = 0;
  while (f(hi) <= 0.0) {
    hi *= 2.0;
    if (++iterations > kMaxIterations || !std::isfinite(hi)) {
      fail(ErrorCode::kNumerical, "lambda_star: no upper bracket found");
    }
  }
  double lo = hi;
  while (f(lo) >= 0.0) {
    lo *= 0.5;
    if (++iterations > kMaxIterations || lo == 0.0) {
      fail(ErrorCode::kNumerical, "lambda_star: no lower bracket found");
    }
  }

  // Safeguarded Newton started from the right: on a convex function the
  // iterates decrease monotonically towards the root.
  double x = hi;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (fx > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double slope = mech.alpha + 2.0 * mech.beta * x + mech.pi.small_jump_mean() -
                         mech.pi.tilted_first_moment(x);
    double next = x - fx / slope;
    if (!(slope > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 2.0 * std::numeric_limits<double>::epsilon() * x ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return next;
    }
    x = next;
  }
  fail(ErrorCode::kNumerical, "lambda_star: iteration cap reached");
}

TiltedMechanism::TiltedMechanism(BranchingMechanism base, double shift)
    : base_(std::move(base)), shift_(shift) {
  if (!(shift_ > 0.0)) fail(ErrorCode::kInvalidParameter, "tilt shift must be > 0");
}

double TiltedMechanism::drift() const {
  return base_.alpha + 2.0 * base_.beta * shift_ + base_.pi.small_jump_mean();
}

double TiltedMechanism::operator()(double lam) const {
  if (lam + shift_ < -1e-12 * std::max(1.0, shift_)) {
    fail(ErrorCode::kDomain, "psi*: argument below -lambda*");
  }
  return drift() * lam + base_.beta * lam * lam - base_.pi.tilted_laplace(shift_, lam);
}

double TiltedMechanism::derivative(double lam) const {
  if (lam + shift_ < -1e-12 * std::max(1.0, shift_)) {
    fail(ErrorCode::kDomain, "psi*': argument below -lambda*");
  }
  return drift() + 2.0 * base_.beta * lam - base_.pi.tilted_first_moment(shift_ + lam);
}

double TiltedMechanism::second_derivative_at_zero() const {
  return 2.0 * base_.beta + base_.pi.tilted_second_moment(shift_);
}

TiltedMechanism conditioned_mechanism(const BranchingMechanism& mech) {
  return TiltedMechanism(mech, lambda_star(mech));
}

double phi_star_u(const ImmigrationMechanism& imm, double lam_star, double u, double lam) {
  if (lam + lam_star + u < 0.0) {
    fail(ErrorCode::kDomain, "phi*_u: requires lam + lambda* + u >= 0");
  }
  return imm.delta * lam + imm.nu.tilted_laplace(lam_star + u, lam);
}

double phi_star(const ImmigrationMechanism& imm, double lam_star, double lam) {
  require_nonnegative_argument(lam, "phi_star");
  return phi_star_u(imm, lam_star, 0.0, lam);
}

MechanismDiagnostics validate(const BranchingMechanism& mech, const ImmigrationMechanism& imm) {
  validate_branching(mech);
  validate_immigration(imm);
  MechanismDiagnostics d;
  d.lambda_star = lambda_star(mech);
  d.q = psi_prime(mech, d.lambda_star);
  d.p = phi(imm, d.lambda_star);
  d.psi_prime_zero = mech.alpha - mech.pi.large_jump_mean();
  d.large_jump_mean = mech.pi.large_jump_mean();
  d.immigration_enabled = !imm.disabled();
  return d;
}

}  // namespace csbp
