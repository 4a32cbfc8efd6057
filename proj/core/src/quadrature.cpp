#include "csbp/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "csbp/error.hpp"

namespace csbp {

GaussLegendre::GaussLegendre(int order) {
  if (order < 1) fail(ErrorCode::kInvalidParameter, "Gauss-Legendre order must be >= 1");
  const int n = order;
  nodes_.resize(n);
  weights_.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    nodes_[i] = -x;
    nodes_[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights_[i] = w;
    weights_[n - 1 - i] = w;
  }
  if (n == 1) {
    nodes_[0] = 0.0;
    weights_[0] = 2.0;
  }
}

void GaussLegendre::composite_points(double a, double b, int panels, std::vector<double>& x,
                                     std::vector<double>& w) const {
  x.clear();
  w.clear();
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double mid = lo + 0.5 * width;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      x.push_back(mid + 0.5 * width * nodes_[i]);
      w.push_back(0.5 * width * weights_[i]);
    }
  }
}

double GaussLegendre::integrate(const std::function<double(double)>& f, double a, double b,
                                int panels) const {
  std::vector<double> x, w;
  composite_points(a, b, panels, x, w);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * f(x[i]);
  return sum;
}

QuadratureResult integrate_refined(
    const GaussLegendre& rule,
    const std::function<void(std::span<const double>, std::span<double>)>& batch, double a,
    double b, double rel_tol, double abs_tol, int max_panels) {
  if (a == b) return {0.0, 0, true};
  std::vector<double> x, w, fx;
  auto estimate = [&](int panels) {
    rule.composite_points(a, b, panels, x, w);
    fx.assign(x.size(), 0.0);
    batch(x, fx);
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * fx[i];
    return sum;
  };
  double previous = estimate(1);
  for (int panels = 2; panels <= max_panels; panels *= 2) {
    const double current = estimate(panels);
    if (std::abs(current - previous) <= std::max(abs_tol, rel_tol * std::abs(current))) {
      return {current, panels, true};
    }
    previous = current;
  }
  return {previous, max_panels, false};
}

}  // namespace csbp
