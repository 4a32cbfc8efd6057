#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "csbp/error.hpp"
#include "csbp/laplace_inversion.hpp"
#include "csbp/ode.hpp"
#include "csbp/quadrature.hpp"
#include "oracles/quadratic.hpp"

using namespace csbp;

TEST(DormandPrince, ExponentialDecay) {
  auto dp = ode::make_dormand_prince<1>([](double, const ode::State<1>& y) { return ode::State<1>{-y[0]}; },
                                        {1e-12, 1e-14});
  const auto y = dp.integrate({1.0}, 0.0, 3.0);
  EXPECT_NEAR(y[0], std::exp(-3.0), 1e-12);
}

TEST(DormandPrince, LogisticAndIntegrateThrough) {
  // u' = u - u^2, the quadratic semigroup with lambda* = 1.
  auto dp = ode::make_dormand_prince<1>(
      [](double, const ode::State<1>& y) { return ode::State<1>{y[0] - y[0] * y[0]}; }, {1e-12, 1e-14});
  const double times[] = {0.25, 0.5, 1.0, 2.0};
  const oracle::Quadratic o;
  dp.integrate_through({0.5}, 0.0, times, [&](std::size_t j, const ode::State<1>& y) {
    EXPECT_NEAR(y[0], o.u(times[j], 0.5), 1e-11);
  });
}

TEST(DormandPrince, RejectsBackwardIntervalsAndBlowUp) {
  auto dp = ode::make_dormand_prince<1>([](double, const ode::State<1>& y) { return ode::State<1>{y[0] * y[0]}; },
                                        {1e-10, 1e-12});
  EXPECT_THROW(dp.integrate({1.0}, 1.0, 0.0), Error);
  // y' = y^2 from 1 explodes at t = 1.
  EXPECT_THROW(dp.integrate({1.0}, 0.0, 2.0), Error);
}

TEST(GaussLegendre, ExactForPolynomials) {
  for (int order : {2, 5, 16}) {
    const GaussLegendre rule(order);
    const double wsum = std::accumulate(rule.weights().begin(), rule.weights().end(), 0.0);
    EXPECT_NEAR(wsum, 2.0, 1e-14);
    const int degree = 2 * order - 1;
    const double exact = (std::pow(2.0, degree + 1) - 1.0) / (degree + 1);
    EXPECT_NEAR(rule.integrate([&](double x) { return std::pow(x, degree); }, 1.0, 2.0), exact,
                1e-12 * exact);
  }
}

TEST(GaussLegendre, RefinedIntegration) {
  const GaussLegendre rule(8);
  auto batch = [](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(-x[i]) * std::cos(5.0 * x[i]);
  };
  const auto res = integrate_refined(rule, batch, 0.0, 10.0, 1e-13, 1e-15);
  EXPECT_TRUE(res.converged);
  // int_0^10 e^{-x} cos 5x dx
  const double exact = (1.0 - std::exp(-10.0) * (std::cos(50.0) - 5.0 * std::sin(50.0))) / 26.0;
  EXPECT_NEAR(res.value, exact, 1e-13);
}

TEST(Stehfest, WeightsSumToZeroAndInvertExponential) {
  const auto v = stehfest_weights(14);
  ASSERT_EQ(v.size(), 14u);
  EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 0.0, 1e-6);
  // F(p) = 1 / (p + 1) inverts to e^{-x}.
  const double ln2 = std::log(2.0);
  for (double x : {0.5, 1.0, 2.0}) {
    double f = 0.0;
    for (int k = 1; k <= 14; ++k) f += v[k - 1] / (k * ln2 / x + 1.0);
    EXPECT_NEAR(f * ln2 / x, std::exp(-x), 1e-4);
  }
}

class InversionAgainstQuadratic : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const BranchingMechanism mech{-1.0, 1.0, JumpMeasure::zero()};
    std::vector<double> nodes, surv;
    // 24 geometric nodes on [0.01, 2].
    for (int k = 0; k < 24; ++k) {
      const double s = 0.01 * std::pow(200.0, k / 23.0);
      nodes.push_back(s);
      surv.push_back(oracle::Quadratic{}.v_star(s));
    }
    table_ = new NStarMassTable(conditioned_mechanism(mech), nodes, surv);
  }
  static void TearDownTestSuite() { delete table_; }
  static NStarMassTable* table_;
};
NStarMassTable* InversionAgainstQuadratic::table_ = nullptr;

TEST_F(InversionAgainstQuadratic, CdfMatchesExponentialLawWithinBudget) {
  // For the quadratic family the conditioned excursion mass is Exp(mean c_s).
  const oracle::Quadratic o;
  const auto nodes = table_->s_nodes();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double c = o.excursion_scale(nodes[k]);
    EXPECT_NEAR(table_->node_mean(k), c, 1e-9 * c);
    double worst = 0.0;
    for (double f : {0.01, 0.1, 0.3, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      worst = std::max(worst, std::abs(table_->cdf(k, f * c) + std::expm1(-f)));
    }
    EXPECT_LT(worst, 2e-4) << "node " << k;
  }
  EXPECT_LE(table_->monotonicity_defect(), 1e-4);
}

TEST_F(InversionAgainstQuadratic, CdfIsNondecreasingAndQuantilesInvert) {
  for (std::size_t k = 0; k < table_->s_nodes().size(); ++k) {
    const auto f = table_->cdf_values(k);
    for (std::size_t i = 1; i < f.size(); ++i) ASSERT_GE(f[i], f[i - 1]);
    EXPECT_GE(f.front(), 0.0);
    EXPECT_LE(f.back(), 1.0);
    for (double u : {0.05, 0.25, 0.5, 0.75, 0.95, 0.999}) {
      EXPECT_NEAR(table_->cdf(k, table_->quantile(k, u)), u, 1e-6);
    }
  }
}

TEST_F(InversionAgainstQuadratic, InterpolatedQuantileBetweenNodes) {
  const oracle::Quadratic o;
  for (double s : {0.05, 0.3, 0.75, 1.5}) {
    for (double u : {0.1, 0.5, 0.9}) {
      const double exact = -o.excursion_scale(s) * std::log1p(-u);
      EXPECT_NEAR(table_->quantile(s, u), exact, 0.01 * exact) << "s=" << s << " u=" << u;
    }
  }
}
