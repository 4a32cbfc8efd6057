#pragma once

#include <cstdint>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "csbp/mechanisms.hpp"
#include "csbp/quadrature.hpp"

namespace csbp {

struct SolverOptions {
  double ode_rel_tol = 1e-10;
  double ode_abs_tol = 1e-12;
  int quad_points = 16;
};

/// Numerical evaluator for the Laplace-functional layer of a (psi, phi)-CBI:
/// u_t(lam), u*_t(theta), v*_s, w_t(r, theta), the immigration integral and
/// the resulting Laplace transforms. Evaluations of u and u* are memoised;
/// the memo is guarded by a shared mutex so one solver may be shared by
/// concurrent workers, and results never depend on cache state.
class SemigroupSolver {
 public:
  SemigroupSolver(BranchingMechanism mech, ImmigrationMechanism imm, SolverOptions options = {});

  SemigroupSolver(const SemigroupSolver& other);
  SemigroupSolver& operator=(const SemigroupSolver&) = delete;

  const BranchingMechanism& mechanism() const noexcept { return mech_; }
  const ImmigrationMechanism& immigration() const noexcept { return imm_; }
  const SolverOptions& options() const noexcept { return options_; }
  const TiltedMechanism& tilted() const noexcept { return tilted_; }
  const MechanismDiagnostics& diagnostics() const noexcept { return diag_; }
  double lambda_star() const noexcept { return diag_.lambda_star; }

  /// Solves du/ds = -psi(u), u(0) = lam.
  double u(double t, double lam) const;
  /// Solves du/ds = -psi*(u), u(0) = theta.
  double u_star(double t, double theta) const;
  /// Second route to u*: u_t(theta + lambda*) - lambda*.
  double u_star_via_shift(double t, double theta) const;
  /// u at each of the nondecreasing times, from one sweep of the ODE.
  std::vector<double> u_path(double lam, std::span<const double> times) const;
  std::vector<double> u_star_path(double theta, std::span<const double> times) const;

  /// v*_s = N*(X_s > 0), the root of int_{v}^{inf} dxi / psi*(xi) = s.
  /// Requires beta > 0 (for the supported families this is Grey's condition).
  double survival_v_star(double s) const;
  /// Tail integral int_{v}^{inf} dxi / psi*(xi).
  double tail_integral(double v) const;

  /// w_t(r, theta) in [0, +inf]; +inf means the backbone surely survives.
  double w(double t, double r, double theta) const;

  double immigration_integral(double t, double lam) const;
  double cbi_laplace(double x, double t, double lam) const;
  /// E_x[r^{Z_t} e^{-theta Lambda_t}] = cbi_laplace(x, t, theta + lambda*(1 - r)).
  double joint_backbone_laplace(double x, double t, double r, double theta) const;

  /// Backbone branching generator psi(lambda*(1-r)) / lambda*.
  double F(double r) const;
  /// Backbone immigration generator phi(lambda*) - phi(lambda*(1-r)).
  double G(double r) const;

  /// Solves the integral equation for e^{-w} directly as a coupled ODE in t
  /// and returns |e^{-w}(ode) - e^{-w_of(t, r, theta)}|.
  double lemma1_residual(double t, double r, double theta) const;

  /// int_0^t phi*(u*_s(theta)) ds: exponent of the spine-dressing Laplace
  /// transform.
  double spine_dressing_exponent(double t, double theta) const;

 private:
  enum class Kind : std::uint8_t { kU, kUStar };
  struct Key {
    Kind kind;
    std::uint64_t t_bits;
    std::uint64_t lam_bits;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  double cached(Kind kind, double t, double lam) const;
  double solve(Kind kind, double t, double lam) const;
  std::vector<double> path(Kind kind, double lam, std::span<const double> times) const;
  double integrate_over_path(Kind kind, double lam, double t,
                             const std::function<double(double)>& integrand) const;

  BranchingMechanism mech_;
  ImmigrationMechanism imm_;
  SolverOptions options_;
  MechanismDiagnostics diag_;
  TiltedMechanism tilted_;
  GaussLegendre rule_;

  mutable std::shared_mutex cache_mutex_;
  mutable std::unordered_map<Key, double, KeyHash> cache_;
};

}  // namespace csbp
