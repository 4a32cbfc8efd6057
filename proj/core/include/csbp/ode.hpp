#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "csbp/error.hpp"

namespace csbp::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Tolerances {
  double rel = 1e-10;
  double abs = 1e-12;
  std::size_t max_steps = 2'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Embedded Dormand-Prince 5(4) pair with FSAL and an elementary
/// proportional step-size controller. The right-hand side is called as
/// rhs(t, y) -> State<N>.
template <std::size_t N, class Rhs>
class DormandPrince {
 public:
  DormandPrince(Rhs rhs, Tolerances tol) : rhs_(std::move(rhs)), tol_(tol) {}

  /// Advances y from t0 to t1 (t1 >= t0). `h` carries the step size across
  /// successive calls; pass 0 to let the integrator pick one.
  State<N> advance(State<N> y, double t0, double t1, double& h, Stats* stats = nullptr) const {
    if (t1 == t0) return y;
    if (!(t1 > t0)) fail(ErrorCode::kDomain, "ode: integration interval must be increasing");

    State<N> k1 = rhs_(t0, y);
    check_finite(k1, t0);
    if (!(h > 0.0)) h = initial_step(y, k1, t0, t1);

    double t = t0;
    std::size_t steps = 0;
    while (t < t1) {
      if (++steps > tol_.max_steps) {
        fail(ErrorCode::kNumerical, "ode: step budget exhausted at t=" + std::to_string(t));
      }
      const bool last = t + h >= t1;
      const double step = last ? t1 - t : h;

      State<N> k2, k3, k4, k5, k6, k7, tmp, y5;
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + step * (a21 * k1[i]);
      k2 = rhs_(t + c2 * step, tmp);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
      k3 = rhs_(t + c3 * step, tmp);
      for (std::size_t i = 0; i < N; ++i) {
        tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      }
      k4 = rhs_(t + c4 * step, tmp);
      for (std::size_t i = 0; i < N; ++i) {
        tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      }
      k5 = rhs_(t + c5 * step, tmp);
      for (std::size_t i = 0; i < N; ++i) {
        tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      k6 = rhs_(t + step, tmp);
      for (std::size_t i = 0; i < N; ++i) {
        y5[i] = y[i] + step * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      }
      k7 = rhs_(t + step, y5);

      double err = 0.0;
      bool finite = true;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                 e7 * k7[i]);
        const double sc = tol_.abs + tol_.rel * std::max(std::abs(y[i]), std::abs(y5[i]));
        err = std::max(err, std::abs(e) / sc);
        finite = finite && std::isfinite(y5[i]) && std::isfinite(k7[i]);
      }
      if (!finite) err = 1e10;

      if (err <= 1.0) {
        t = last ? t1 : t + step;
        y = y5;
        k1 = k7;
        if (stats) ++stats->accepted;
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        // A truncated final step says nothing about the natural step size.
        if (!last) h = step * factor;
      } else {
        if (stats) ++stats->rejected;
        h = step * std::max(0.1, 0.9 * std::pow(err, -0.2));
        if (h < 1e-15 * std::max(1.0, std::abs(t))) {
          fail(ErrorCode::kNumerical,
               "ode: step size underflow at t=" + std::to_string(t) + " (tolerance unreachable)");
        }
      }
    }
    return y;
  }

  State<N> integrate(State<N> y, double t0, double t1, Stats* stats = nullptr) const {
    double h = 0.0;
    return advance(y, t0, t1, h, stats);
  }

  /// Solution at each of the nondecreasing `times` (all >= t0).
  template <class Out>
  void integrate_through(State<N> y, double t0, std::span<const double> times, Out&& out) const {
    double h = 0.0;
    double t = t0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      y = advance(y, t, times[j], h);
      t = times[j];
      out(j, y);
    }
  }

 private:
  static void check_finite(const State<N>& k, double t) {
    for (double v : k) {
      if (!std::isfinite(v)) {
        fail(ErrorCode::kNumerical, "ode: non-finite derivative at t=" + std::to_string(t));
      }
    }
  }

  double initial_step(const State<N>& y, const State<N>& f0, double t0, double t1) const {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = tol_.abs + tol_.rel * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(f0[i]) / sc);
    }
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    State<N> y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * f0[i];
    const State<N> f1 = rhs_(t0 + h0, y1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = tol_.abs + tol_.rel * std::abs(y[i]);
      d2 = std::max(d2, std::abs(f1[i] - f0[i]) / sc / h0);
    }
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, t1 - t0});
  }

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  // 5th minus embedded 4th order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  Rhs rhs_;
  Tolerances tol_;
};

template <std::size_t N, class Rhs>
DormandPrince<N, Rhs> make_dormand_prince(Rhs rhs, Tolerances tol) {
  return DormandPrince<N, Rhs>(std::move(rhs), tol);
}

}  // namespace csbp::ode
