#include "csbp/semigroup.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "csbp/error.hpp"
#include "csbp/ode.hpp"

namespace csbp {
namespace {

constexpr std::size_t kCacheLimit = 1 << 20;

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    fail(ErrorCode::kDomain, std::string(what) + " must be finite and >= 0");
  }
}

void require_unit_interval(double r) {
  if (!(r >= 0.0 && r <= 1.0)) fail(ErrorCode::kDomain, "r must lie in [0, 1]");
}

}  // namespace

std::size_t SemigroupSolver::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = k.t_bits * 0x9E3779B97F4A7C15ull;
  h ^= k.lam_bits + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(k.kind) << 61;
  return static_cast<std::size_t>(h);
}

SemigroupSolver::SemigroupSolver(BranchingMechanism mech, ImmigrationMechanism imm,
                                 SolverOptions options)
    : mech_(std::move(mech)),
      imm_(std::move(imm)),
      options_(options),
      diag_(validate(mech_, imm_)),
      tilted_(mech_, diag_.lambda_star),
      rule_(options.quad_points) {
  if (!(options_.ode_rel_tol > 0.0) || !(options_.ode_abs_tol > 0.0)) {
    fail(ErrorCode::kInvalidParameter, "ODE tolerances must be > 0");
  }
}

SemigroupSolver::SemigroupSolver(const SemigroupSolver& other)
    : mech_(other.mech_),
      imm_(other.imm_),
      options_(other.options_),
      diag_(other.diag_),
      tilted_(other.tilted_),
      rule_(other.rule_) {}

double SemigroupSolver::solve(Kind kind, double t, double lam) const {
  const double times[] = {t};
  return path(kind, lam, times).front();
}

std::vector<double> SemigroupSolver::path(Kind kind, double lam,
                                          std::span<const double> times) const {
  for (std::size_t i = 0; i < times.size(); ++i) {
    require_nonnegative(times[i], "t");
    if (i > 0 && times[i] < times[i - 1]) fail(ErrorCode::kDomain, "path times must be sorted");
  }
  std::vector<double> out(times.size(), lam);
  const ode::Tolerances tol{options_.ode_rel_tol, options_.ode_abs_tol};
  auto store = [&](std::size_t j, const ode::State<1>& y) { out[j] = y[0]; };
  if (kind == Kind::kU) {
    // psi(lambda*) = 0 makes lambda* a fixed point; 0 is one too.
    auto rhs = [this](double, const ode::State<1>& y) {
      return ode::State<1>{-psi(mech_, std::max(0.0, y[0]))};
    };
    ode::make_dormand_prince<1>(rhs, tol).integrate_through({lam}, 0.0, times, store);
  } else {
    // 0 is a fixed point of psi*; trial stages from a large theta can
    // overshoot below it, and the clamp makes such steps fail the error test.
    auto rhs = [this](double, const ode::State<1>& y) {
      return ode::State<1>{-tilted_(std::max(0.0, y[0]))};
    };
    ode::make_dormand_prince<1>(rhs, tol).integrate_through({lam}, 0.0, times, store);
  }
  return out;
}

double SemigroupSolver::cached(Kind kind, double t, double lam) const {
  const Key key{kind, std::bit_cast<std::uint64_t>(t), std::bit_cast<std::uint64_t>(lam)};
  {
    std::shared_lock lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double value = solve(kind, t, lam);
  std::unique_lock lock(cache_mutex_);
  if (cache_.size() >= kCacheLimit) cache_.clear();
  cache_.emplace(key, value);
  return value;
}

double SemigroupSolver::u(double t, double lam) const {
  require_nonnegative(t, "t");
  require_nonnegative(lam, "lambda");
  if (t == 0.0 || lam == 0.0) return lam;
  return cached(Kind::kU, t, lam);
}

double SemigroupSolver::u_star(double t, double theta) const {
  require_nonnegative(t, "t");
  require_nonnegative(theta, "theta");
  if (t == 0.0 || theta == 0.0) return theta;
  return cached(Kind::kUStar, t, theta);
}

double SemigroupSolver::u_star_via_shift(double t, double theta) const {
  return u(t, theta + lambda_star()) - lambda_star();
}

std::vector<double> SemigroupSolver::u_path(double lam, std::span<const double> times) const {
  require_nonnegative(lam, "lambda");
  return path(Kind::kU, lam, times);
}

std::vector<double> SemigroupSolver::u_star_path(double theta,
                                                 std::span<const double> times) const {
  require_nonnegative(theta, "theta");
  return path(Kind::kUStar, theta, times);
}

double SemigroupSolver::tail_integral(double v) const {
  if (!(v > 0.0)) fail(ErrorCode::kDomain, "tail integral needs v > 0");
  if (mech_.beta <= 0.0) {
    fail(ErrorCode::kNStarMassUndefined,
         "int^inf dxi/psi*(xi) diverges without a quadratic term; N* survival mass undefined");
  }
  const double q = diag_.q;
  const double split = std::max({v, 1.0, lambda_star(), q / mech_.beta});
  constexpr double kRelTol = 1e-14;

  // [v, split] in log coordinates: xi / psi*(xi) -> 1/q as xi -> 0.
  double head = 0.0;
  if (split > v) {
    auto batch = [&](std::span<const double> z, std::span<double> out) {
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double xi = std::exp(z[i]);
        out[i] = xi / tilted_(xi);
      }
    };
    const auto res =
        integrate_refined(rule_, batch, std::log(v), std::log(split), kRelTol, 0.0, 1 << 14);
    if (!res.converged) fail(ErrorCode::kNumerical, "tail integral: head quadrature failed");
    head = res.value;
  }
  // [split, inf) with xi = split / tau; the integrand tends to 1/(beta split).
  auto batch = [&](std::span<const double> tau, std::span<double> out) {
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const double xi = split / tau[i];
      out[i] = split / (tau[i] * tau[i] * tilted_(xi));
    }
  };
  const auto res = integrate_refined(rule_, batch, 0.0, 1.0, kRelTol, 0.0, 1 << 14);
  if (!res.converged) fail(ErrorCode::kNumerical, "tail integral: tail quadrature failed");
  return head + res.value;
}

double SemigroupSolver::survival_v_star(double s) const {
  if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::kDomain, "v*_s needs finite s > 0");
  if (mech_.beta <= 0.0) {
    fail(ErrorCode::kNStarMassUndefined,
         "v*_s undefined: beta = 0 and the tail integral of 1/psi* diverges");
  }
  const double q = diag_.q;
  const double beta = mech_.beta;
  // Work in z = log v; H(e^z) - s is decreasing in z.
  auto h = [&](double z) { return tail_integral(std::exp(z)) - s; };
  double z = std::log(q / (beta * std::expm1(q * s)));
  double lo = z, hi = z;
  double h_lo = h(lo), h_hi = h_lo;
  int guard = 0;
  while (h_lo <= 0.0) {
    lo -= 1.0;
    h_lo = h(lo);
    if (++guard > 200) fail(ErrorCode::kNumerical, "v*: lower bracket not found");
  }
  while (h_hi >= 0.0) {
    hi += 1.0;
    h_hi = h(hi);
    if (++guard > 400) fail(ErrorCode::kNumerical, "v*: upper bracket not found");
  }
  z = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double value = h(z);
    if (value == 0.0) return std::exp(z);
    if (value > 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    const double v = std::exp(z);
    const double slope = -v / tilted_(v);
    double next = z - value / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - z) < 1e-14 * std::max(1.0, std::abs(z)) || hi - lo < 1e-15) {
      return std::exp(next);
    }
    z = next;
  }
  fail(ErrorCode::kNumerical, "v*: root finder iteration cap reached");
}

double SemigroupSolver::w(double t, double r, double theta) const {
  require_nonnegative(t, "t");
  require_unit_interval(r);
  require_nonnegative(theta, "theta");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double ls = lambda_star();
  if (r == 0.0 && theta == 0.0) return kInf;
  if (t == 0.0) return -std::log(r);
  const double gap = u(t, theta + ls * (1.0 - r)) - u_star(t, theta);
  const double arg = 1.0 - gap / ls;
  constexpr double kSlack = 1e-8;
  if (arg < -kSlack || arg > 1.0 + kSlack || !std::isfinite(arg)) {
    fail(ErrorCode::kInvariantViolation,
         "w: log argument " + std::to_string(arg) + " outside [0, 1]; ODE accuracy problem");
  }
  if (arg <= 0.0) return kInf;
  return -std::log(std::min(arg, 1.0));
}

double SemigroupSolver::integrate_over_path(Kind kind, double lam, double t,
                                            const std::function<double(double)>& integrand) const {
  auto batch = [&](std::span<const double> s, std::span<double> out) {
    const std::vector<double> values = path(kind, lam, s);
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = integrand(values[i]);
  };
  const auto res = integrate_refined(rule_, batch, 0.0, t, options_.ode_rel_tol, 1e-15, 1 << 10);
  if (!res.converged) fail(ErrorCode::kNumerical, "quadrature along the ODE path did not converge");
  return res.value;
}

double SemigroupSolver::immigration_integral(double t, double lam) const {
  require_nonnegative(t, "t");
  require_nonnegative(lam, "lambda");
  if (t == 0.0 || imm_.disabled() || lam == 0.0) return 0.0;
  return integrate_over_path(Kind::kU, lam, t, [this](double u) { return phi(imm_, std::max(0.0, u)); });
}

double SemigroupSolver::spine_dressing_exponent(double t, double theta) const {
  require_nonnegative(t, "t");
  require_nonnegative(theta, "theta");
  if (t == 0.0 || imm_.disabled() || theta == 0.0) return 0.0;
  const double ls = lambda_star();
  return integrate_over_path(Kind::kUStar, theta, t, [this, ls](double u) {
    return phi_star(imm_, ls, std::max(0.0, u));
  });
}

double SemigroupSolver::cbi_laplace(double x, double t, double lam) const {
  require_nonnegative(x, "x");
  return std::exp(-x * u(t, lam) - immigration_integral(t, lam));
}

double SemigroupSolver::joint_backbone_laplace(double x, double t, double r, double theta) const {
  require_unit_interval(r);
  require_nonnegative(theta, "theta");
  return cbi_laplace(x, t, theta + lambda_star() * (1.0 - r));
}

double SemigroupSolver::F(double r) const {
  require_unit_interval(r);
  return psi(mech_, lambda_star() * (1.0 - r)) / lambda_star();
}

double SemigroupSolver::G(double r) const {
  require_unit_interval(r);
  return phi(imm_, lambda_star()) - phi(imm_, lambda_star() * (1.0 - r));
}

double SemigroupSolver::lemma1_residual(double t, double r, double theta) const {
  require_nonnegative(t, "t");
  require_unit_interval(r);
  require_nonnegative(theta, "theta");
  if (r == 0.0 && theta == 0.0) {
    fail(ErrorCode::kDomain, "lemma1_residual: (r, theta) = (0, 0) is the w = +inf point");
  }
  const double ls = lambda_star();
  // State (e^{-w}, u*). d/dt e^{-w} = [psi*(u* - ls e^{-w}) - psi*(u*)] / ls.
  auto rhs = [this, ls](double, const ode::State<2>& y) {
    const double us = y[1];
    return ode::State<2>{(tilted_(us - ls * y[0]) - tilted_(us)) / ls, -tilted_(us)};
  };
  const ode::Tolerances tol{options_.ode_rel_tol, options_.ode_abs_tol};
  const ode::State<2> end = ode::make_dormand_prince<2>(rhs, tol).integrate({r, theta}, 0.0, t);
  const double closed = std::exp(-w(t, r, theta));
  return std::abs(end[0] - closed);
}

}  // namespace csbp
