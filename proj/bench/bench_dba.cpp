// Serial reference (1 worker) against the OpenMP path on scenario-parallel
// kernels. The argument is the worker count.

#include <benchmark/benchmark.h>

#include <random>

#include "dba/builders.hpp"
#include "dba/parallel.hpp"
#include "dba/pha.hpp"
#include "dba/sgscore.hpp"
#include "dba/solvers.hpp"

using namespace dba;

namespace {

const DBAProblem& qp_instance() {
  static const DBAProblem p = random_qp(5, 40, 20, 60, 256, 7);
  return p;
}

const DBAProblem& lp_instance() {
  static const DBAProblem p = random_two_stage(3, 12, 10, 20, 64, 8);
  return p;
}

void BM_MSolveSmw(benchmark::State& state) {
  set_worker_count(static_cast<int>(state.range(0)));
  MSolverOptions o;
  o.strategy = MStrategy::SmwExact;
  const MSolver ms = build_msolver(qp_instance(), o);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Vec h(ms.dim());
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ms.solve(h));
  set_worker_count(1);
}

void BM_AdmmIterations(benchmark::State& state) {
  set_worker_count(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  cfg.max_iter = 50;
  cfg.tol_kkt = 0.0;
  cfg.tol_gap = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(admm_solve(qp_instance(), cfg).iterations);
  set_worker_count(1);
}

void BM_PhaIterations(benchmark::State& state) {
  set_worker_count(static_cast<int>(state.range(0)));
  PhaConfig cfg;
  cfg.max_iter = 5;
  cfg.tol_nonant = 0.0;
  cfg.tol_rel = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(pha_solve(lp_instance(), cfg).iterations);
  set_worker_count(1);
}

}  // namespace

BENCHMARK(BM_MSolveSmw)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AdmmIterations)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PhaIterations)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
