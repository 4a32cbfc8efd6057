#include <benchmark/benchmark.h>

#include "csbp/backbone.hpp"
#include "csbp/kernels.hpp"
#include "csbp/semigroup.hpp"

using namespace csbp;

namespace {

const SemigroupSolver& quadratic() {
  static const SemigroupSolver s({-1.0, 1.0, JumpMeasure::zero()}, {1.0, JumpMeasure::zero()});
  return s;
}

const SemigroupSolver& exponential() {
  static const SemigroupSolver s({-1.0, 0.5, JumpMeasure::compound_exponential(1.0, 2.0)},
                                 {0.5, JumpMeasure::compound_exponential(1.0, 1.0)});
  return s;
}

const TransitionKernel& kernel(bool generic) {
  static const TransitionKernel q(quadratic(), 1.0);
  static const TransitionKernel g(exponential(), 1.0);
  return generic ? g : q;
}

void BM_SolverU(benchmark::State& state) {
  const auto& s = state.range(0) ? exponential() : quadratic();
  double lam = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.u(1.0, lam));
    lam = lam < 5.0 ? lam + 0.013 : 0.1;
  }
}
BENCHMARK(BM_SolverU)->Arg(0)->Arg(1);

void BM_Transition(benchmark::State& state) {
  const auto& k = kernel(state.range(0) != 0);
  Rng rng = make_stream(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(k.sample_transition(1.0, 0.7, rng));
}
BENCHMARK(BM_Transition)->Arg(0)->Arg(1);

void BM_ExcursionMass(benchmark::State& state) {
  const auto& k = kernel(state.range(0) != 0);
  Rng rng = make_stream(2, 0);
  for (auto _ : state) benchmark::DoNotOptimize(k.sample_nstar_mass(0.7, rng));
}
BENCHMARK(BM_ExcursionMass)->Arg(0)->Arg(1);

void BM_SampleJoint(benchmark::State& state) {
  const BackboneSimulator sim(kernel(state.range(0) != 0));
  Rng rng = make_stream(3, 0);
  for (auto _ : state) benchmark::DoNotOptimize(sim.sample_joint(1.0, rng));
}
BENCHMARK(BM_SampleJoint)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
