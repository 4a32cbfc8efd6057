#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csbp/mechanisms.hpp"

namespace csbp {

/// Gaver-Stehfest weights V_1..V_n (n even): f(x) ~ (ln 2 / x) sum V_k F(k ln 2 / x).
std::vector<double> stehfest_weights(int n);

struct InversionOptions {
  int grid_points = 4096;
  int stehfest_terms = 14;
  /// Sup-norm budget on the tabulated CDF; the build fails if the raw
  /// inversion is visibly less accurate than this.
  double eps = 1e-4;
  double ode_rel_tol = 1e-13;
};

/// Tabulated CDFs of the excursion-measure mass at gap s conditioned on
/// survival (Laplace transform 1 - u*_s(theta) / v*_s), one per time node,
/// obtained by real-axis Laplace inversion against an exponential control
/// variate with the same mean. Sampling is by inverse CDF with linear
/// interpolation in x and log-linear interpolation of quantiles in s.
class NStarMassTable {
 public:
  /// `survival[k]` is v*_{s_nodes[k]}; nodes must be increasing and > 0.
  NStarMassTable(const TiltedMechanism& tilted, std::vector<double> s_nodes,
                 std::vector<double> survival, InversionOptions options = {});

  std::span<const double> s_nodes() const noexcept { return s_nodes_; }
  std::span<const double> x_grid() const noexcept { return x_; }
  std::span<const double> cdf_values(std::size_t node) const;
  double node_mean(std::size_t node) const { return mean_[node]; }

  /// Tabulated CDF at `node`, including the exponential tail extension.
  double cdf(std::size_t node, double x) const;
  double quantile(std::size_t node, double u) const;
  /// Quantile at gap s in [s_nodes.front(), s_nodes.back()].
  double quantile(double s, double u) const;

  /// Largest decrease found in the raw inverted CDFs before they were made
  /// monotone; a direct measure of inversion noise.
  double monotonicity_defect() const noexcept { return defect_; }

 private:
  struct Tail {
    std::size_t index = 0;  // last tabulated grid index
    double mean = 1.0;      // exponential tail scale beyond x_[index]
  };

  std::vector<double> s_nodes_;
  std::vector<double> survival_;
  std::vector<double> mean_;
  std::vector<double> x_;
  std::vector<std::vector<double>> cdf_;
  std::vector<Tail> tail_;
  double defect_ = 0.0;
};

}  // namespace csbp
