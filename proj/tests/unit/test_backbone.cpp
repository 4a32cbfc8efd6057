#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "csbp/backbone.hpp"
#include "csbp/error.hpp"
#include "csbp/quadrature.hpp"
#include "csbp/verify.hpp"
#include "oracles/quadratic.hpp"

using namespace csbp;

namespace {

// Bundles a solver, kernel and simulator with stable addresses.
struct Model {
  Model(BranchingMechanism mech, ImmigrationMechanism imm, double horizon, BackboneOptions opt = {})
      : solver(std::move(mech), std::move(imm)), kernel(solver, horizon), sim(kernel, opt) {}
  SemigroupSolver solver;
  TransitionKernel kernel;
  BackboneSimulator sim;
};

double poisson_pmf(double mean, int n) { return std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0)); }

double proportion_z(double hits, double n, double p) { return (hits / n - p) / std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST(Backbone, QuadraticBranchingIsBinary) {
  const Model m({-1.0, 1.0, JumpMeasure::zero()}, {1.0, JumpMeasure::zero()}, 1.0);
  Rng rng = make_stream(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto [n, y] = m.sim.sample_branch_event(rng);
    ASSERT_EQ(n, 2u);
    ASSERT_EQ(y, 0.0);
    const auto [k, g] = m.sim.sample_immigration_event(rng);
    ASSERT_EQ(k, 1u);
    ASSERT_EQ(g, 0.0);
  }
  EXPECT_NEAR(m.sim.branch_total_weight(), 1.0, 1e-12);
  EXPECT_NEAR(m.sim.immigration_total_weight(), 1.0, 1e-12);
}

TEST(Backbone, EventWeightsMatchBackboneRates) {
  const Model atoms({-1.0, 0.5, JumpMeasure::finite_atoms({{0.5, 1.0}, {2.0, 0.5}})},
                    {0.3, JumpMeasure::finite_atoms({{1.0, 1.0}})}, 1.0);
  const Model expo({-1.0, 0.5, JumpMeasure::compound_exponential(1.0, 2.0)},
                   {0.5, JumpMeasure::compound_exponential(1.0, 1.0)}, 1.0);
  for (const Model* m : {&atoms, &expo}) {
    const auto d = m->solver.diagnostics();
    EXPECT_NEAR(m->sim.branch_total_weight(), d.lambda_star * d.q, 1e-12);
    EXPECT_NEAR(m->sim.immigration_total_weight(), d.p, 1e-12);
  }
}

TEST(Backbone, AtomBranchOffspringLaw) {
  // Pi = delta_2: n | y = 2 is Poisson(2 lambda*) given n >= 2.
  const Model m({-1.0, 0.5, JumpMeasure::finite_atoms({{2.0, 1.0}})}, {}, 1.0);
  const double L = 2.0 * m.solver.lambda_star();
  Rng rng = make_stream(2, 0);
  double n = 0;
  double hits = 0;
  for (int i = 0; i < 200000; ++i) {
    const auto [k, y] = m.sim.sample_branch_event(rng);
    ASSERT_GE(k, 2u);
    if (y == 0.0) continue;
    ASSERT_EQ(y, 2.0);
    n += 1;
    hits += k == 2;
  }
  ASSERT_GT(n, 10000);
  const double p2 = poisson_pmf(L, 2) / (1.0 - std::exp(-L) * (1.0 + L));
  EXPECT_LT(std::abs(proportion_z(hits, n, p2)), 4.0);
}

TEST(Backbone, ImmigrationAtomLaw) {
  // nu = delta_1, delta = 0, lambda* = 1: n is Poisson(1) given n >= 1.
  const Model m({-1.0, 1.0, JumpMeasure::zero()}, {0.0, JumpMeasure::finite_atoms({{1.0, 1.0}})}, 1.0);
  const double p1 = std::exp(-1.0) / -std::expm1(-1.0);
  EXPECT_NEAR(p1, 0.5820, 1e-4);
  Rng rng = make_stream(3, 0);
  const int n = 100000;
  double hits = 0;
  for (int i = 0; i < n; ++i) {
    const auto [k, y] = m.sim.sample_immigration_event(rng);
    ASSERT_EQ(y, 1.0);
    hits += k == 1;
  }
  EXPECT_LT(std::abs(proportion_z(hits, n, p1)), 4.0);
}

TEST(Backbone, OffspringMarginalMatchesEnumeration) {
  // p_n = [beta lambda*^2 1{n=2} + sum_i m_i Poisson(lambda* y_i)(n)] / (lambda* q)
  const std::vector<Atom> atoms{{0.5, 1.0}, {2.0, 0.5}};
  const Model m({-1.0, 0.5, JumpMeasure::finite_atoms(atoms)}, {}, 1.0);
  const double ls = m.solver.lambda_star();
  const double total = ls * m.solver.diagnostics().q;
  Rng rng = make_stream(4, 0);
  const int draws = 200000;
  std::map<std::uint64_t, double> counts;
  for (int i = 0; i < draws; ++i) counts[m.sim.sample_branch_event(rng).first] += 1;
  double covered = 0.0;
  for (int k = 2; k <= 10; ++k) {
    double p = k == 2 ? 0.5 * ls * ls : 0.0;
    for (const Atom& a : atoms) p += a.mass * poisson_pmf(ls * a.location, k);
    p /= total;
    covered += p;
    EXPECT_LT(std::abs(proportion_z(counts[k], draws, p)), 4.0) << "n=" << k;
  }
  EXPECT_GT(covered, 0.99);
}

TEST(Backbone, SeedLawRatesAndSamples) {
  const double ls = 1.0;
  const SeedLaw life(JumpMeasure::compound_exponential(1.0, 2.0), ls, 1);
  const double a = 3.0;
  EXPECT_NEAR(life.rate(INFINITY), 2.0 / (a * a), 1e-15);
  EXPECT_NEAR(life.rate(1.0), 2.0 * (2 * a + 1) / (a * a * (a + 1) * (a + 1)), 1e-15);
  const SeedLaw spine(JumpMeasure::compound_exponential(1.0, 2.0), ls, 0);
  EXPECT_NEAR(spine.rate(1.0), 2.0 / (a * (a + 1)), 1e-15);
  EXPECT_THROW(SeedLaw(JumpMeasure::zero(), ls, 2), Error);

  // Quadrature of y^k e^{-ls y}(1 - e^{-yv}) rate decay e^{-decay y} for the mean.
  const GaussLegendre rule(32);
  for (double v : {0.5, 5.0}) {
    for (const SeedLaw* law : {&life, &spine}) {
      const int k = law == &life ? 1 : 0;
      auto density = [&](double y) { return std::pow(y, k) * 2.0 * std::exp(-a * y) * -std::expm1(-y * v); };
      const double mass = rule.integrate(density, 0.0, 40.0, 8);
      const double first = rule.integrate([&](double y) { return y * density(y); }, 0.0, 40.0, 8);
      EXPECT_NEAR(law->rate(v), mass, 1e-12);
      Rng rng = make_stream(5, static_cast<std::uint64_t>(v * 10 + k));
      std::vector<double> ys(100000);
      for (auto& y : ys) y = law->sample(v, rng);
      const auto est = estimate_mean(ys);
      EXPECT_LT(std::abs(z_score(est.mean, first / mass, est.stderr_)), 4.0);
    }
  }
}

TEST(Backbone, GenealogyInvariants) {
  const Model m({-1.0, 0.5, JumpMeasure::finite_atoms({{0.5, 1.0}, {2.0, 0.5}})},
                {0.3, JumpMeasure::finite_atoms({{1.0, 1.0}})}, 1.5);
  for (int rep = 0; rep < 1000; ++rep) {
    Rng rng = make_stream(6, rep);
    const auto f = m.sim.simulate_forest(1.0, rng);
    ASSERT_EQ(f.horizon, 1.5);
    std::map<std::uint64_t, std::uint64_t> children;
    std::set<std::uint64_t> branched;
    for (std::size_t i = 0; i < f.individuals.size(); ++i) {
      const auto& ind = f.individuals[i];
      ASSERT_EQ(ind.id, i);
      ASSERT_GE(ind.birth, 0.0);
      ASSERT_LT(ind.birth, f.horizon);
      if (ind.death) {
        ASSERT_GT(*ind.death, ind.birth);
        ASSERT_LT(*ind.death, f.horizon);
      }
      ASSERT_FALSE(ind.parent && ind.immigration_event);
      if (ind.parent) {
        const auto& parent = f.individuals.at(*ind.parent);
        ASSERT_TRUE(parent.death.has_value());
        ASSERT_EQ(*parent.death, ind.birth);
        children[*ind.parent] += 1;
      } else if (ind.immigration_event) {
        ASSERT_EQ(f.immigrations.at(*ind.immigration_event).time, ind.birth);
      } else {
        ASSERT_EQ(ind.birth, 0.0);
      }
    }
    for (const auto& b : f.branches) {
      ASSERT_GE(b.offspring, 2u);
      ASSERT_EQ(children[b.individual], b.offspring);
      ASSERT_EQ(*f.individuals.at(b.individual).death, b.time);
      ASSERT_TRUE(branched.insert(b.individual).second);
    }
    std::uint64_t dead = 0;
    for (const auto& ind : f.individuals) dead += ind.death.has_value();
    ASSERT_EQ(dead, f.branches.size());
    for (const auto& e : f.immigrations) ASSERT_GE(e.immigrants, 1u);
    ASSERT_EQ(f.alive_at_horizon(), f.individuals.size() - dead);
  }
}

TEST(Backbone, BackboneSizeMoments) {
  // delta = 0: Z_t | X_t ~ Poisson(lambda* X_t), so E[Z_1] = e and P(Z_1 = 0) = e^{-1}.
  const Model m({-1.0, 1.0, JumpMeasure::zero()}, {}, 1.0);
  const int n = 100000;
  std::vector<double> z(n);
  double zeros = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(7, i);
    z[i] = static_cast<double>(m.sim.simulate_forest(1.0, rng).alive_at_horizon());
    zeros += z[i] == 0.0;
  }
  const auto est = estimate_mean(z);
  EXPECT_LT(std::abs(z_score(est.mean, std::exp(1.0), est.stderr_)), 4.0);
  EXPECT_LT(std::abs(proportion_z(zeros, n, std::exp(-1.0))), 4.0);
}

TEST(Backbone, EmptyForests) {
  const Model m({-1.0, 1.0, JumpMeasure::zero()}, {}, 1.0);
  Rng rng = make_stream(8, 0);
  const auto f = m.sim.simulate_forest(0.0, rng);
  EXPECT_TRUE(f.individuals.empty());
  EXPECT_TRUE(f.immigrations.empty());
  const auto j = m.sim.dress_and_mass(f, rng);
  EXPECT_EQ(j.z, 0u);
  EXPECT_EQ(j.lambda, 0.0);
  EXPECT_EQ(m.sim.sample_spine_dressing(rng), 0.0);
  try {
    m.sim.sample_immigration_event(rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kImmigrationDisabled);
  }
  EXPECT_THROW(m.sim.simulate_forest(-1.0, rng), Error);
}

TEST(Backbone, PopulationGuard) {
  const Model m({-1.0, 1.0, JumpMeasure::zero()}, {1.0, JumpMeasure::zero()}, 1.0, {10});
  Rng rng = make_stream(9, 0);
  try {
    m.sim.simulate_forest(100.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPopulationBlowup);
  }
  EXPECT_THROW(BackboneSimulator(m.kernel, {0}), Error);
}

TEST(Backbone, LifelineGraftCountMatchesIntensity) {
  // On [0, 0.5] with t = 1 all gaps exceed the cutoff, so every graft is a
  // record and the count is Poisson with mean int kappa.
  const Model quad({-1.0, 1.0, JumpMeasure::zero()}, {}, 1.0);
  const Model expo({-1.0, 0.5, JumpMeasure::compound_exponential(1.0, 2.0)}, {}, 1.0);
  const GaussLegendre rule(16);
  for (const Model* m : {&quad, &expo}) {
    const double mean = rule.integrate([&](double tau) { return m->sim.lifeline_intensity(tau); }, 0.0, 0.5, 4);
    const int n = 20000;
    std::vector<double> counts(n);
    std::vector<DressingRecord> records;
    for (int i = 0; i < n; ++i) {
      Rng rng = make_stream(10, i);
      records.clear();
      m->sim.dress_lifeline(0.0, 0.5, rng, 0, &records);
      for (const auto& r : records) {
        ASSERT_GE(r.time, 0.0);
        ASSERT_LE(r.time, 0.5);
        ASSERT_GT(r.mass, 0.0);
        ASSERT_NE(r.source, DressingSource::kNearHorizonAggregate);
      }
      counts[i] = static_cast<double>(records.size());
    }
    const auto est = estimate_mean(counts);
    EXPECT_LT(std::abs(z_score(est.mean, mean, std::sqrt(mean / n))), 4.0);
    EXPECT_NEAR(est.stderr_ * est.stderr_ * n, mean, 0.05 * mean);
  }
}

TEST(Backbone, SpineDressingLaplace) {
  // E exp(-theta S) = exp(-delta int_0^t u*_s(theta) ds); E S = delta (1 - e^{-qt}) / q.
  const Model m({-1.0, 1.0, JumpMeasure::zero()}, {1.0, JumpMeasure::zero()}, 1.0);
  const oracle::Quadratic o;
  const int n = 100000;
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(11, i);
    s[i] = m.sim.sample_spine_dressing(rng);
  }
  const auto est = estimate_mean(s);
  EXPECT_LT(std::abs(z_score(est.mean, -std::expm1(-1.0), est.stderr_)), 4.0);
  for (double theta : {0.5, 2.0}) {
    std::vector<double> e(n);
    for (int i = 0; i < n; ++i) e[i] = std::exp(-theta * s[i]);
    const auto le = estimate_mean(e);
    EXPECT_LT(std::abs(z_score(le.mean, std::exp(-o.u_star_integral(1.0, theta)), le.stderr_)), 4.0);
  }
}

TEST(Backbone, JointLawForJumpFamilies) {
  const Model atoms({-1.0, 0.5, JumpMeasure::finite_atoms({{0.5, 1.0}, {2.0, 0.5}})},
                    {0.3, JumpMeasure::finite_atoms({{1.0, 1.0}})}, 1.0);
  const Model expo({-1.0, 0.5, JumpMeasure::compound_exponential(1.0, 2.0)},
                   {0.5, JumpMeasure::compound_exponential(1.0, 1.0)}, 1.0);
  const std::vector<double> r_grid{0.0, 0.5, 1.0};
  const std::vector<double> theta_grid{0.0, 1.0};
  for (const Model* m : {&atoms, &expo}) {
    const auto samples = sample_joint_batch(m->sim, 1.0, 5000, 12, 0);
    const auto report = laplace_report(samples, r_grid, theta_grid, [&](double r, double theta) {
      return m->solver.joint_backbone_laplace(1.0, 1.0, r, theta);
    });
    for (const auto& row : report.rows) EXPECT_LT(std::abs(row.z), 4.0) << row.r << " " << row.theta;
    // Z | Lambda ~ Poisson(lambda* Lambda) gives E Z = lambda* E Lambda.
    std::vector<double> d(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      d[i] = static_cast<double>(samples[i].z) - m->solver.lambda_star() * samples[i].lambda;
    }
    const auto est = estimate_mean(d);
    EXPECT_LT(std::abs(z_score(est.mean, 0.0, est.stderr_)), 4.0);
  }
}
