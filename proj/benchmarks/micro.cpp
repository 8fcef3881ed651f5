#include "sublr/baselines.hpp"
#include "sublr/estimator.hpp"
#include "sublr/experiments.hpp"
#include "sublr/map_design.hpp"
#include "sublr/two_step.hpp"

#include <benchmark/benchmark.h>

using namespace sublr;

namespace {

void BM_Apply(benchmark::State& state) {
  const Index p = state.range(0);
  Rng rng(1);
  const AffineMap map = gaussian_random(p, 20, 50, rng);
  const Matrix l = generate_low_rank(20, 50, 6, rng);
  for (auto _ : state) benchmark::DoNotOptimize(map.apply(l));
}
BENCHMARK(BM_Apply)->Arg(384)->Arg(426)->Arg(468);

void BM_Svt(benchmark::State& state) {
  Rng rng(2);
  const Matrix m = standard_normal(20, 50, rng);
  for (auto _ : state) benchmark::DoNotOptimize(svt(m, 3.0));
}
BENCHMARK(BM_Svt);

void BM_GlsDesigned(benchmark::State& state) {
  // Known-subspace estimator at p = N d = 300.
  const NoiseModel noise = NoiseModel::iid(300, 0.1);
  const DesignResult design = solve_power_constrained_design(noise, 300, 1000.0);
  Rng rng(3);
  const Vector y = standard_normal(300, rng);
  for (auto _ : state) {
    const GlsEstimator gls(design.a_hat, noise);
    benchmark::DoNotOptimize(gls.estimate(y));
  }
}
BENCHMARK(BM_GlsDesigned)->Unit(benchmark::kMillisecond);

void BM_TwoStep(benchmark::State& state) {
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.sigma2 = 0.01;
  c.oracle = false;
  Rng rng(4);
  const Matrix l = generate_low_rank(20, 50, 6, rng);
  for (auto _ : state) benchmark::DoNotOptimize(run_two_step(c, l, rng));
}
BENCHMARK(BM_TwoStep)->Unit(benchmark::kMicrosecond);

struct SolverCase {
  AffineMap map;
  Vector y;
};

SolverCase solver_case() {
  Rng rng(5);
  const Matrix l = generate_low_rank(20, 50, 6, rng);
  AffineMap map = gaussian_random(426, 20, 50, rng);
  Vector y = map.apply(l) + 0.1 * standard_normal(426, rng);
  return {std::move(map), std::move(y)};
}

void BM_NnmIterations(benchmark::State& state) {
  const SolverCase s = solver_case();
  SolverOptions opt;
  opt.tau = default_nnm_tau(s.map, 0.01);
  opt.max_iters = static_cast<int>(state.range(0));
  opt.tol = 1e-300;
  for (auto _ : state) benchmark::DoNotOptimize(nnm_solve(s.map, s.y, opt));
}
BENCHMARK(BM_NnmIterations)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_MfIterations(benchmark::State& state) {
  const SolverCase s = solver_case();
  SolverOptions opt;
  opt.rank = 6;
  opt.max_iters = static_cast<int>(state.range(0));
  opt.tol = 1e-300;
  for (auto _ : state) benchmark::DoNotOptimize(mf_solve(s.map, s.y, opt));
}
BENCHMARK(BM_MfIterations)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
