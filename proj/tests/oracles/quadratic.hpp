#pragma once

// Closed forms for psi(lam) = -q lam + beta lam^2 (no jumps), drift
// immigration delta. Used as independent oracles in tests.

#include <cmath>

namespace csbp::oracle {

struct Quadratic {
  double q = 1.0;
  double beta = 1.0;
  double delta = 1.0;

  double lambda_star() const { return q / beta; }
  /// C_t = beta (e^{qt} - 1) / q
  double growth_scale(double t) const { return beta * std::expm1(q * t) / q; }
  /// c_s = beta (1 - e^{-qs}) / q, the conditioned excursion mass mean
  double excursion_scale(double s) const { return -beta * std::expm1(-q * s) / q; }

  double u(double t, double lam) const { return lam * std::exp(q * t) / (1.0 + lam * growth_scale(t)); }
  double u_star(double t, double theta) const {
    return theta * std::exp(-q * t) / (1.0 + theta * excursion_scale(t));
  }
  double v_star(double s) const { return q / (beta * std::expm1(q * s)); }
  /// int_0^t u_s(lam) ds
  double u_integral(double t, double lam) const { return std::log1p(lam * growth_scale(t)) / beta; }
  /// int_0^t u*_s(theta) ds
  double u_star_integral(double t, double theta) const {
    return std::log1p(theta * excursion_scale(t)) / beta;
  }
  double cbi_laplace(double x, double t, double lam) const {
    return std::exp(-x * u(t, lam) - delta * u_integral(t, lam));
  }
  double joint(double x, double t, double r, double theta) const {
    return cbi_laplace(x, t, theta + lambda_star() * (1.0 - r));
  }
  double w(double t, double r, double theta) const {
    const double ls = lambda_star();
    return -std::log(1.0 - (u(t, theta + ls * (1.0 - r)) - u_star(t, theta)) / ls);
  }
};

}  // namespace csbp::oracle
