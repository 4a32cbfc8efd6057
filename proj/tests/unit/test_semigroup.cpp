#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <thread>

#include "csbp/error.hpp"
#include "csbp/semigroup.hpp"
#include "oracles/quadratic.hpp"

using namespace csbp;

namespace {

SemigroupSolver quadratic_solver(double delta = 1.0) {
  return SemigroupSolver({-1.0, 1.0, JumpMeasure::zero()}, {delta, JumpMeasure::zero()});
}

SemigroupSolver atoms_solver() {
  return SemigroupSolver({-1.0, 0.5, JumpMeasure::finite_atoms({{0.5, 1.0}, {2.0, 0.5}})},
                         {0.3, JumpMeasure::finite_atoms({{1.0, 1.0}})});
}

SemigroupSolver exponential_solver() {
  return SemigroupSolver({-1.0, 0.5, JumpMeasure::compound_exponential(1.0, 2.0)},
                         {0.5, JumpMeasure::compound_exponential(1.0, 1.0)});
}

}  // namespace

TEST(Semigroup, QuadraticClosedFormValues) {
  const auto s = quadratic_solver();
  EXPECT_NEAR(s.u(1.0, 0.5), 0.7310586, 1e-7);
  EXPECT_NEAR(s.u_star(1.0, 1.0), 0.2253996, 1e-7);
  EXPECT_NEAR(s.survival_v_star(1.0), 0.5819767, 1e-7);
  EXPECT_NEAR(s.immigration_integral(1.0, 0.5), 0.6201145, 1e-7);
  EXPECT_NEAR(s.cbi_laplace(1.0, 1.0, 0.5), 0.2589363, 1e-7);
  EXPECT_NEAR(s.w(1.0, 0.5, 0.0), 1.3132617, 1e-7);
  EXPECT_NEAR(s.joint_backbone_laplace(1.0, 1.0, 0.5, 0.5), std::exp(-2.0), 1e-10);
}

TEST(Semigroup, QuadraticAgainstOracleOnGrid) {
  const auto s = quadratic_solver();
  const oracle::Quadratic o;
  for (double t : {0.1, 0.5, 1.0, 2.5}) {
    for (double lam : {0.0, 0.2, 1.0, 3.0, 10.0}) {
      EXPECT_NEAR(s.u(t, lam), o.u(t, lam), 1e-9 * std::max(1.0, lam));
      EXPECT_NEAR(s.u_star(t, lam), o.u_star(t, lam), 1e-9 * std::max(1.0, lam));
      EXPECT_NEAR(s.immigration_integral(t, lam), o.u_integral(t, lam), 1e-9);
      EXPECT_NEAR(s.spine_dressing_exponent(t, lam), o.u_star_integral(t, lam), 1e-9);
    }
    EXPECT_NEAR(s.survival_v_star(t), o.v_star(t), 1e-9 * o.v_star(t));
  }
}

TEST(Semigroup, TrivialIdentities) {
  const auto s = quadratic_solver();
  EXPECT_EQ(s.u(0.0, 0.7), 0.7);
  EXPECT_EQ(s.u_star(0.0, 0.7), 0.7);
  EXPECT_EQ(s.u_star(2.0, 0.0), 0.0);
  EXPECT_EQ(s.immigration_integral(0.0, 0.5), 0.0);
  EXPECT_EQ(s.cbi_laplace(1.0, 1.0, 0.0), 1.0);
  EXPECT_EQ(s.w(1.3, 1.0, 0.0), 0.0);
  EXPECT_TRUE(std::isinf(s.w(1.0, 0.0, 0.0)));
  EXPECT_NEAR(s.immigration_integral(1.7, 1.0), 1.7, 1e-10);
  EXPECT_EQ(quadratic_solver(0.0).cbi_laplace(0.0, 1.0, 0.5), 1.0);
}

TEST(Semigroup, GeneratorsFAndG) {
  const auto s = quadratic_solver();
  EXPECT_NEAR(s.F(0.5), -0.25, 1e-15);
  EXPECT_NEAR(s.F(0.0), 0.0, 1e-15);
  EXPECT_EQ(s.F(1.0), 0.0);
  EXPECT_NEAR(s.G(0.25), 0.25, 1e-15);
  EXPECT_EQ(s.G(0.0), 0.0);
  for (const auto& solver : {quadratic_solver(), atoms_solver(), exponential_solver()}) {
    EXPECT_NEAR(solver.G(1.0), solver.diagnostics().p, 1e-14);
    EXPECT_NEAR(solver.F(0.0), 0.0, 1e-12);
  }
}

TEST(Semigroup, FixedPointAndTiltIdentity) {
  for (const auto& s : {quadratic_solver(), atoms_solver(), exponential_solver()}) {
    const double ls = s.lambda_star();
    // Two independent ODE routes agree to the solver's relative tolerance.
    const double tol = 10.0 * (s.options().ode_abs_tol + s.options().ode_rel_tol * ls);
    for (double t : {0.1, 1.0, 5.0}) EXPECT_LT(std::abs(s.u(t, ls) - ls), tol);
    for (double t : {0.3, 1.0, 2.0}) {
      for (double theta : {0.1, 1.0, 4.0}) {
        EXPECT_LT(std::abs(s.u_star(t, theta) - s.u_star_via_shift(t, theta)), tol * std::max(1.0, theta));
      }
    }
  }
}

TEST(Semigroup, MonotonicityAndBounds) {
  for (const auto& s : {quadratic_solver(), atoms_solver(), exponential_solver()}) {
    const double ls = s.lambda_star();
    for (double t : {0.5, 2.0}) {
      double prev = 0.0;
      for (double lam = 0.0; lam <= 6.0; lam += 0.25) {
        const double v = s.u(t, lam);
        EXPECT_GE(v, prev);
        EXPECT_LE(v, std::max(lam, ls) + 1e-12);
        prev = v;
      }
    }
    // toward lambda* from either side
    EXPECT_LT(s.u(0.5, 0.3 * ls), s.u(1.0, 0.3 * ls));
    EXPECT_GT(s.u(0.5, 3.0 * ls), s.u(1.0, 3.0 * ls));
    for (double r : {0.0, 0.5, 1.0}) {
      for (double theta : {0.0, 1.0}) {
        EXPECT_LE(s.u_star(1.0, theta), s.u(1.0, theta + ls * (1.0 - r)) + 1e-12);
      }
    }
  }
}

TEST(Semigroup, FlowProperty) {
  for (const auto& s : {quadratic_solver(), atoms_solver()}) {
    for (double lam : {0.2, 2.0}) {
      EXPECT_NEAR(s.u(1.5, lam), s.u(0.5, s.u(1.0, lam)), 10.0 * s.options().ode_abs_tol + 1e-10 * lam);
    }
  }
}

TEST(Semigroup, SurvivalMass) {
  for (const auto& s : {quadratic_solver(), atoms_solver(), exponential_solver()}) {
    EXPECT_GT(s.survival_v_star(0.001), s.survival_v_star(0.01));
    EXPECT_GT(s.survival_v_star(0.01), s.survival_v_star(0.1));
    const double v = s.survival_v_star(1.0);
    for (double theta : {1.0, 100.0, 1e4}) EXPECT_LT(s.u_star(1.0, theta), v);
    // theta -> infinity route as an oracle
    EXPECT_NEAR(s.u_star(1.0, 1e6), v, 1e-5 * v);
    EXPECT_NEAR(s.tail_integral(v), 1.0, 1e-9);
  }
}

TEST(Semigroup, SurvivalMassNeedsQuadraticTerm) {
  const SemigroupSolver s({1.0, 0.0, JumpMeasure::finite_atoms({{1.5, 2.0}})}, {});
  try {
    s.survival_v_star(1.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNStarMassUndefined);
  }
}

TEST(Semigroup, WConsistency) {
  for (const auto& s : {quadratic_solver(), atoms_solver(), exponential_solver()}) {
    const double ls = s.lambda_star();
    for (double t : {0.25, 1.0}) {
      for (double r : {0.25, 0.9}) {
        for (double theta : {0.0, 2.0}) {
          const double w = s.w(t, r, theta);
          const double lhs = ls * -std::expm1(-w);
          const double rhs = s.u(t, theta + ls * (1.0 - r)) - s.u_star(t, theta);
          EXPECT_NEAR(lhs, rhs, 1e-10);
        }
      }
    }
  }
  const oracle::Quadratic o;
  EXPECT_NEAR(quadratic_solver().w(0.7, 0.3, 1.2), o.w(0.7, 0.3, 1.2), 1e-9);
  EXPECT_NEAR(quadratic_solver().w(0.0, 0.3, 1.2), -std::log(0.3), 1e-14);
}

TEST(Semigroup, WEquationResidual) {
  for (const auto& s : {quadratic_solver(), atoms_solver()}) {
    EXPECT_NEAR(s.lemma1_residual(0.0, 0.4, 0.5), 0.0, 1e-15);
    EXPECT_NEAR(s.lemma1_residual(1.0, 1.0, 0.0), 0.0, 1e-12);
    for (double t : {0.25, 1.0, 2.0}) {
      for (double r : {0.25, 0.5, 0.9}) {
        for (double theta : {0.0, 0.5, 2.0}) EXPECT_LT(s.lemma1_residual(t, r, theta), 1e-8);
      }
    }
  }
}

TEST(Semigroup, JointReducesToCbi) {
  for (const auto& s : {quadratic_solver(), exponential_solver()}) {
    for (double theta : {0.0, 0.5, 2.0}) {
      EXPECT_EQ(s.joint_backbone_laplace(1.0, 1.0, 1.0, theta), s.cbi_laplace(1.0, 1.0, theta));
    }
    EXPECT_EQ(s.joint_backbone_laplace(1.0, 1.0, 0.0, 0.0), s.cbi_laplace(1.0, 1.0, s.lambda_star()));
  }
  const oracle::Quadratic o;
  for (double r : {0.0, 0.5, 1.0}) {
    for (double theta : {0.0, 0.5, 1.0, 2.0}) {
      EXPECT_NEAR(quadratic_solver().joint_backbone_laplace(1.0, 1.0, r, theta), o.joint(1.0, 1.0, r, theta),
                  1e-9);
    }
  }
}

TEST(Semigroup, SharedCacheUnderConcurrency) {
  const auto s = exponential_solver();
  const auto fresh = exponential_solver();
  std::vector<double> results(4 * 50);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      for (int i = 0; i < 50; ++i) results[w * 50 + i] = s.u(0.1 * (i % 10 + 1), 0.05 * i);
    });
  }
  for (auto& t : pool) t.join();
  for (int w = 0; w < 4; ++w) {
    for (int i = 0; i < 50; ++i) EXPECT_EQ(results[w * 50 + i], fresh.u(0.1 * (i % 10 + 1), 0.05 * i));
  }
}
