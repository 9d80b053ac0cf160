// Serial vs OpenMP time-step kernels, plus the allocation-per-call reference
// kernels, on the reference grid (Nt = 128, Na = 256, Nx = 200).
//
//   OMP_NUM_THREADS=8 ./bench_kernels

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "degpop/kernels.hpp"
#include "degpop/solver.hpp"

using namespace degpop;

namespace {

struct Setup {
  Grid grid = Grid::build(1.0, 2.0, 128, 200, 0.3);
  RateSpec rates{[](double, double, double) { return 0.2; }, [](double a, double) { return std::max(0.0, a - 0.25); },
                 0.25};
  DiffusionCoefficient coeff = make_power_law(0.5, 0.3);
  ControlRegion region = ControlRegion::single(0.2, 0.45, 0.3);
  kernels::Discretization disc{grid, coeff, rates, region.indicator(grid), kernels::Integrator::Sdirk2};
  Field y = Field::slice(grid, [](double a, double x) { return a * (2 - a) * std::sin(M_PI * x); });
  std::vector<double> out = std::vector<double>(grid.slice_size());
};

Setup& setup() {
  static Setup s;
  return s;
}

kernels::Execution exec_of(const benchmark::State& st) {
  return st.range(0) == 0 ? kernels::Execution::Serial : kernels::Execution::Parallel;
}

void BM_ForwardStep(benchmark::State& st) {
  auto& s = setup();
  const auto exec = exec_of(st);
  for (auto _ : st) {
    kernels::forward_step(s.disc, 10, s.y.values(), {}, s.out, false, exec);
    benchmark::DoNotOptimize(s.out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(s.grid.slice_size()));
}

void BM_BackwardStep(benchmark::State& st) {
  auto& s = setup();
  const auto exec = exec_of(st);
  for (auto _ : st) {
    kernels::backward_step(s.disc, 10, s.y.values(), {}, s.out, true, false, exec);
    benchmark::DoNotOptimize(s.out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(s.grid.slice_size()));
}

void BM_ReferenceForwardStep(benchmark::State& st) {
  auto& s = setup();
  for (auto _ : st) {
    kernels::reference::forward_step(s.disc, 10, s.y.values(), {}, s.out);
    benchmark::DoNotOptimize(s.out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(s.grid.slice_size()));
}

void BM_ReferenceBackwardStep(benchmark::State& st) {
  auto& s = setup();
  for (auto _ : st) {
    kernels::reference::backward_step(s.disc, 10, s.y.values(), {}, s.out, true);
    benchmark::DoNotOptimize(s.out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(s.grid.slice_size()));
}

// Whole terminal solve: 128 steps with the residual check on.
void BM_ForwardTerminal(benchmark::State& st) {
  auto& s = setup();
  SolverOptions opt;
  opt.execution = exec_of(st);
  const Propagator P(s.grid, s.coeff, s.rates, s.region, opt);
  for (auto _ : st) benchmark::DoNotOptimize(P.forward_terminal(s.y));
}

}  // namespace

BENCHMARK(BM_ForwardStep)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BackwardStep)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ReferenceForwardStep)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ReferenceBackwardStep)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ForwardTerminal)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
