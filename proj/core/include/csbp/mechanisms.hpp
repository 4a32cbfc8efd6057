#pragma once

#include <variant>
#include <vector>

namespace csbp {

/// Lévy measures supported by the toolkit. Every family has closed-form
/// integrals against the kernels used by the branching and immigration
/// mechanisms, and an exact sampler for every tilted law built from it.
struct NoJumps {};

/// Density rate * decay * exp(-decay * x) dx on (0, inf); total mass `rate`.
struct CompoundExponential {
  double rate = 0.0;
  double decay = 0.0;
};

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

/// Sum of mass_i * delta_{location_i}; atoms sorted by location, distinct.
struct FiniteAtoms {
  std::vector<Atom> atoms;
};

class JumpMeasure {
 public:
  using Family = std::variant<NoJumps, CompoundExponential, FiniteAtoms>;

  JumpMeasure() = default;

  static JumpMeasure zero();
  static JumpMeasure compound_exponential(double rate, double decay);
  /// Sorts the atoms; rejects non-positive or duplicated locations.
  static JumpMeasure finite_atoms(std::vector<Atom> atoms);

  const Family& family() const noexcept { return family_; }
  bool is_zero() const noexcept;

  /// int (e^{-a y} - e^{-(a+lam) y}) M(dy). Requires a + lam >= 0 and, for
  /// the exponential family, a > -decay.
  double tilted_laplace(double a, double lam) const;
  /// int e^{-a y} M(dy)
  double tilted_mass(double a) const;
  /// int y e^{-a y} M(dy)
  double tilted_first_moment(double a) const;
  /// int y^2 e^{-a y} M(dy)
  double tilted_second_moment(double a) const;
  /// int_{(0,1)} y M(dy)
  double small_jump_mean() const;
  /// int_{[1,inf)} y M(dy)
  double large_jump_mean() const;

 private:
  explicit JumpMeasure(Family family) : family_(std::move(family)) {}

  Family family_ = NoJumps{};
};

/// psi(lam) = alpha lam + beta lam^2 + int (e^{-lam x} - 1 + lam x 1{x<1}) Pi(dx)
struct BranchingMechanism {
  double alpha = 0.0;
  double beta = 0.0;
  JumpMeasure pi;
};

/// phi(lam) = delta lam + int (1 - e^{-lam x}) nu(dx)
struct ImmigrationMechanism {
  double delta = 0.0;
  JumpMeasure nu;

  bool disabled() const noexcept { return delta == 0.0 && nu.is_zero(); }
};

double psi(const BranchingMechanism& mech, double lam);
double psi_prime(const BranchingMechanism& mech, double lam);
double phi(const ImmigrationMechanism& imm, double lam);

/// The unique positive root of psi. Throws if the mechanism is not a valid
/// supercritical one.
double lambda_star(const BranchingMechanism& mech);

/// psi*(lam) = psi(lam + shift) with shift = lambda*. Kept as (base, shift):
/// the tilted Lévy measure e^{-shift y} Pi(dy) is only ever used implicitly.
class TiltedMechanism {
 public:
  TiltedMechanism(BranchingMechanism base, double shift);

  const BranchingMechanism& base() const noexcept { return base_; }
  double shift() const noexcept { return shift_; }

  /// Defined for lam >= -shift.
  double operator()(double lam) const;
  double derivative(double lam) const;
  /// psi*''(0+) = 2 beta + int y^2 e^{-shift y} Pi(dy)
  double second_derivative_at_zero() const;

  /// Drift b of psi*(lam) = b lam + beta lam^2 - int (1 - e^{-lam y}) e^{-shift y} Pi(dy),
  /// valid because every supported family has finite activity.
  double drift() const;

 private:
  BranchingMechanism base_;
  double shift_;
};

TiltedMechanism conditioned_mechanism(const BranchingMechanism& mech);

/// phi*(lam) = phi(lam + lambda*) - phi(lambda*)
double phi_star(const ImmigrationMechanism& imm, double lam_star, double lam);
/// phi*_u(lam) = phi*(lam + u) - phi*(u). Requires lam + lam_star + u >= 0.
double phi_star_u(const ImmigrationMechanism& imm, double lam_star, double u, double lam);

struct MechanismDiagnostics {
  double lambda_star = 0.0;
  /// Backbone branching rate psi'(lambda*).
  double q = 0.0;
  /// Backbone immigration rate phi(lambda*).
  double p = 0.0;
  double psi_prime_zero = 0.0;
  double large_jump_mean = 0.0;
  bool immigration_enabled = false;
};

/// Throws Error with a distinct code for each failed condition.
MechanismDiagnostics validate(const BranchingMechanism& mech, const ImmigrationMechanism& imm);
void validate_branching(const BranchingMechanism& mech);
void validate_immigration(const ImmigrationMechanism& imm);

}  // namespace csbp
