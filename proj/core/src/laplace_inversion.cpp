#include "csbp/laplace_inversion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "csbp/error.hpp"
#include "csbp/ode.hpp"

namespace csbp {
namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

constexpr double kTailStart = 1e-2;

}  // namespace

std::vector<double> stehfest_weights(int n) {
  if (n < 2 || n % 2 != 0 || n > 20) {
    fail(ErrorCode::kInvalidParameter, "Stehfest term count must be even and in [2, 20]");
  }
  const int half = n / 2;
  std::vector<double> v(n);
  for (int k = 1; k <= n; ++k) {
    double sum = 0.0;
    for (int j = (k + 1) / 2; j <= std::min(k, half); ++j) {
      sum += std::pow(j, half) * factorial(2 * j) /
             (factorial(half - j) * factorial(j) * factorial(j - 1) * factorial(k - j) *
              factorial(2 * j - k));
    }
    v[k - 1] = ((k + half) % 2 == 0 ? 1.0 : -1.0) * sum;
  }
  return v;
}

NStarMassTable::NStarMassTable(const TiltedMechanism& tilted, std::vector<double> s_nodes,
                               std::vector<double> survival, InversionOptions options)
    : s_nodes_(std::move(s_nodes)), survival_(std::move(survival)) {
  const std::size_t nodes = s_nodes_.size();
  if (nodes == 0 || survival_.size() != nodes) {
    fail(ErrorCode::kInvalidParameter, "inversion table: node/survival size mismatch");
  }
  for (std::size_t k = 0; k < nodes; ++k) {
    if (!(s_nodes_[k] > 0.0) || (k > 0 && !(s_nodes_[k] > s_nodes_[k - 1]))) {
      fail(ErrorCode::kInvalidParameter, "inversion table: time nodes must be increasing and > 0");
    }
    if (!(survival_[k] > 0.0) || !std::isfinite(survival_[k])) {
      fail(ErrorCode::kInvalidParameter, "inversion table: survival masses must be finite and > 0");
    }
  }
  if (options.grid_points < 16) fail(ErrorCode::kInvalidParameter, "inversion grid too small");

  const double q = tilted.derivative(0.0);
  mean_.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) mean_[k] = std::exp(-q * s_nodes_[k]) / survival_[k];

  const double x_lo = 1e-4 * *std::min_element(mean_.begin(), mean_.end());
  const double x_hi = 60.0 * *std::max_element(mean_.begin(), mean_.end());
  const int m = options.grid_points;
  x_.resize(m);
  const double ratio = std::log(x_hi / x_lo) / (m - 1);
  for (int j = 0; j < m; ++j) x_[j] = x_lo * std::exp(ratio * j);

  const std::vector<double> weights = stehfest_weights(options.stehfest_terms);
  cdf_.assign(nodes, std::vector<double>(m, 0.0));

  // Reciprocal form: w = 1/u* obeys w' = w^2 psi*(1/w) = b w + beta - w^2 J(1/w),
  // which stays smooth for huge theta (w -> 0).
  const double drift = tilted.drift();
  const double beta = tilted.base().beta;
  const double shift = tilted.shift();
  const JumpMeasure& pi = tilted.base().pi;
  auto rhs = [&](double, const ode::State<1>& y) {
    const double w = y[0];
    if (w == 0.0) return ode::State<1>{beta};
    return ode::State<1>{drift * w + beta - w * w * pi.tilted_laplace(shift, 1.0 / w)};
  };
  const auto stepper = ode::make_dormand_prince<1>(rhs, ode::Tolerances{options.ode_rel_tol, 1e-300});

  std::vector<double> u_at(nodes);
  for (int j = 0; j < m; ++j) {
    for (int i = 1; i <= options.stehfest_terms; ++i) {
      const double theta = i * std::numbers::ln2 / x_[j];
      stepper.integrate_through({1.0 / theta}, 0.0, s_nodes_,
                                [&](std::size_t k, const ode::State<1>& y) { u_at[k] = 1.0 / y[0]; });
      const double coeff = weights[i - 1] / i;
      for (std::size_t k = 0; k < nodes; ++k) {
        const double exact_lt = 1.0 - u_at[k] / survival_[k];
        const double reference_lt = 1.0 / (1.0 + theta * mean_[k]);
        cdf_[k][j] += coeff * (exact_lt - reference_lt);
      }
    }
  }

  tail_.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    auto& f = cdf_[k];
    double running = 0.0;
    for (int j = 0; j < m; ++j) {
      const double raw = f[j] - std::expm1(-x_[j] / mean_[k]);
      defect_ = std::max(defect_, running - raw);
      running = std::max(running, std::clamp(raw, 0.0, 1.0));
      f[j] = running;
    }
    if (f.back() < 1.0 - options.eps) {
      fail(ErrorCode::kNumerical,
           "inversion table: CDF does not reach 1 on the grid at s=" + std::to_string(s_nodes_[k]));
    }
    // Cut the table where the survival function drops below eps and
    // continue with an exponential tail fitted on [kTailStart, eps].
    std::size_t cut = 0;
    while (cut + 1 < f.size() && 1.0 - f[cut] > options.eps) ++cut;
    std::size_t start = 0;
    while (start < cut && 1.0 - f[start] > kTailStart) ++start;
    double tail_mean = mean_[k];
    if (start < cut && f[cut] < 1.0 && f[start] < 1.0) {
      const double drop = std::log((1.0 - f[start]) / (1.0 - f[cut]));
      if (drop > 0.0) tail_mean = (x_[cut] - x_[start]) / drop;
    }
    tail_[k] = Tail{cut, tail_mean};
  }
  if (defect_ > options.eps) {
    fail(ErrorCode::kNumerical, "inversion table: raw CDF noise " + std::to_string(defect_) +
                                    " exceeds the accuracy budget");
  }
}

std::span<const double> NStarMassTable::cdf_values(std::size_t node) const { return cdf_.at(node); }

double NStarMassTable::cdf(std::size_t node, double x) const {
  const auto& f = cdf_.at(node);
  const Tail& tail = tail_[node];
  if (x <= 0.0) return 0.0;
  if (x < x_.front()) return f.front() * x / x_.front();
  if (x >= x_[tail.index]) {
    const double ft = f[tail.index];
    return 1.0 - (1.0 - ft) * std::exp(-(x - x_[tail.index]) / tail.mean);
  }
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double a = (x - x_[j]) / (x_[j + 1] - x_[j]);
  return f[j] + a * (f[j + 1] - f[j]);
}

double NStarMassTable::quantile(std::size_t node, double u) const {
  const auto& f = cdf_.at(node);
  const Tail& tail = tail_[node];
  if (u <= f.front()) return f.front() > 0.0 ? x_.front() * u / f.front() : x_.front();
  const double ft = f[tail.index];
  if (u >= ft) {
    if (ft >= 1.0) return x_[tail.index];
    return x_[tail.index] + tail.mean * std::log((1.0 - ft) / (1.0 - u));
  }
  const auto end = f.begin() + static_cast<std::ptrdiff_t>(tail.index) + 1;
  const auto it = std::upper_bound(f.begin(), end, u);
  const std::size_t j = static_cast<std::size_t>(it - f.begin());
  const double f0 = f[j - 1], f1 = f[j];
  const double a = f1 > f0 ? (u - f0) / (f1 - f0) : 0.0;
  return x_[j - 1] + a * (x_[j] - x_[j - 1]);
}

double NStarMassTable::quantile(double s, double u) const {
  if (s <= s_nodes_.front()) return quantile(std::size_t{0}, u);
  if (s >= s_nodes_.back()) return quantile(s_nodes_.size() - 1, u);
  const auto it = std::upper_bound(s_nodes_.begin(), s_nodes_.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - s_nodes_.begin()) - 1;
  const double a = std::log(s / s_nodes_[k]) / std::log(s_nodes_[k + 1] / s_nodes_[k]);
  const double q0 = quantile(k, u);
  const double q1 = quantile(k + 1, u);
  if (q0 <= 0.0 || q1 <= 0.0) return (1.0 - a) * q0 + a * q1;
  return std::exp((1.0 - a) * std::log(q0) + a * std::log(q1));
}

}  // namespace csbp
