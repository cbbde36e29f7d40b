// Serial reference against OpenMP execution for the three hot kernels:
// one ODE Picard step, one tree Picard step and a Monte Carlo cost estimate.
// Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "regimelq/control.hpp"
#include "regimelq/esre.hpp"

using namespace regimelq;

namespace {

CoefficientField cst(Matrix m) { return CoefficientField::constant(std::move(m)); }

// Three regimes, n = 3, m = 2; enough work per grid point to show scaling.
ProblemSpec bench_spec() {
  ProblemSpec s;
  s.n = 3;
  s.m = 2;
  s.horizon = 1.0;
  s.delta = 0.5;
  s.generator = validate_generator(Matrix{{-1, 0.5, 0.5}, {1, -2, 1}, {0.3, 0.7, -1}});
  for (int i = 0; i < 3; ++i) {
    const double w = 1.0 + 0.5 * i;
    RegimeCoefficients c;
    c.A = cst(Matrix{{0.1, 0.2, 0}, {0, -0.1, 0.3}, {0.2, 0, 0.1 * i}});
    c.B = cst(Matrix{{1, 0}, {0, 1}, {0.5, 0.5}});
    c.C = cst(Matrix{{0.2, 0, 0}, {0, 0.1, 0}, {0, 0, 0.15}});
    c.D = cst(Matrix{{0.05, 0}, {0, 0.05}, {0, 0}});
    c.Q = cst(Matrix{{w, 0.1, 0}, {0.1, w, 0.1}, {0, 0.1, w}});
    c.S = cst(Matrix(2, 3));
    c.R = cst(Matrix{{1, 0}, {0, 1}});
    c.G = cst(Matrix::identity(3));
    s.regimes.push_back(c);
  }
  s.check_structure();
  return s;
}

Execution mode(const benchmark::State& state) { return state.range(0) == 0 ? Execution::serial : Execution::parallel; }

void BM_OdePicardStep(benchmark::State& state) {
  const auto spec = bench_spec();
  EsreOptions opts;
  opts.grid_steps = 4000;
  opts.execution = mode(state);
  const auto lat = make_lattice(spec, opts);
  const auto p0 = solve_p0(spec, lat, opts);
  for (auto _ : state) benchmark::DoNotOptimize(picard_step(spec, lat, p0.P, opts));
}

void BM_TreePicardStep(benchmark::State& state) {
  const auto spec = bench_spec();
  EsreOptions opts;
  opts.backend = Backend::tree;
  opts.tree_depth = 200;
  opts.execution = mode(state);
  const auto lat = make_lattice(spec, opts);
  const auto p0 = solve_p0(spec, lat, opts);
  for (auto _ : state) benchmark::DoNotOptimize(picard_step(spec, lat, p0.P, opts));
}

void BM_MonteCarloCost(benchmark::State& state) {
  const auto spec = bench_spec();
  EsreOptions opts;
  opts.grid_steps = 1000;
  const auto sol = solve_esre(spec, opts);
  const auto gain = feedback_gain(sol, spec);
  SimulationOptions sim;
  sim.dt = 1e-3;
  sim.seed = 1;
  sim.execution = mode(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(mc_cost(spec, Policy{&gain, Perturbation()}, {1, 0, -1}, 0, 2000, sim));
}

}  // namespace

BENCHMARK(BM_OdePicardStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TreePicardStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloCost)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
