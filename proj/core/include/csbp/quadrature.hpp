#pragma once

#include <functional>
#include <span>
#include <vector>

namespace csbp {

/// Gauss-Legendre rule on [-1, 1].
class GaussLegendre {
 public:
  explicit GaussLegendre(int order);

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// Composite rule with `panels` equal panels on [a, b].
  double integrate(const std::function<double(double)>& f, double a, double b, int panels = 1) const;

  /// Abscissae of the composite rule in increasing order, with matching
  /// weights, so callers can evaluate the integrand in one sweep.
  void composite_points(double a, double b, int panels, std::vector<double>& x,
                        std::vector<double>& w) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

struct QuadratureResult {
  double value = 0.0;
  int panels = 0;
  bool converged = false;
};

/// Doubles the panel count until successive composite estimates agree to
/// rel_tol (or abs_tol). The batch integrand fills values for sorted points.
QuadratureResult integrate_refined(
    const GaussLegendre& rule,
    const std::function<void(std::span<const double>, std::span<double>)>& batch, double a,
    double b, double rel_tol, double abs_tol, int max_panels = 1 << 12);

}  // namespace csbp
