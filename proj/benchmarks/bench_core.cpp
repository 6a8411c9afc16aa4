#include <benchmark/benchmark.h>

#include <algorithm>

#include "varexp/branches.hpp"
#include "varexp/energy.hpp"
#include "varexp/solvers.hpp"

using namespace varexp;

namespace {

// lower end of the threshold bracket on the default 201-node grid
constexpr double kLambdaStar = 117.9;

GridPtr grid_1d(int n) { return Grid::build(DomainSpec{}, n); }

GridPtr grid_2d(int n)
{
    DomainSpec spec;
    spec.dimension = 2;
    return Grid::build(spec, n);
}

// a smooth positive state so the p-weights are not degenerate
Field sample_state(const GridPtr& g)
{
    const SolverParams params;
    return build_supersolution_small_lambda(g, params).field;
}

} // namespace

static void BM_ResidualAssembly1D(benchmark::State& state)
{
    const GridPtr g = grid_1d(static_cast<int>(state.range(0)));
    const Field u = sample_state(g);
    const EnergyVariant f = EnergyVariant::F(10.0);
    for (auto _ : state) {
        Field r = residual(u, f);
        benchmark::DoNotOptimize(r.values().data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ResidualAssembly1D)->RangeMultiplier(4)->Range(101, 6401)->Complexity(benchmark::oN);

static void BM_JacobianAssembly2D(benchmark::State& state)
{
    const GridPtr g = grid_2d(static_cast<int>(state.range(0)));
    const Field u = sample_state(g);
    const EnergyVariant f = EnergyVariant::F(10.0);
    for (auto _ : state) {
        SparseMatrix j = jacobian(u, f);
        benchmark::DoNotOptimize(j.nonZeros());
    }
}
BENCHMARK(BM_JacobianAssembly2D)->Arg(21)->Arg(41)->Arg(81);

static void BM_AuxiliarySolve(benchmark::State& state)
{
    const GridPtr g = grid_1d(static_cast<int>(state.range(0)));
    const Field load = constant_field(g, 1.0);
    const SolverParams params;
    for (auto _ : state) {
        Field v = solve_auxiliary(load, params);
        benchmark::DoNotOptimize(v.values().data());
    }
}
BENCHMARK(BM_AuxiliarySolve)->Arg(101)->Arg(201)->Arg(401)->Unit(benchmark::kMillisecond);

static void BM_MonotoneIteration(benchmark::State& state)
{
    const GridPtr g = grid_1d(201);
    const SolverParams params;
    const double lambda = 0.01 * static_cast<double>(state.range(0)) * kLambdaStar;
    for (auto _ : state) {
        IterationOutcome o = monotone_iteration(lambda, g, params);
        benchmark::DoNotOptimize(o.iterations);
    }
}
BENCHMARK(BM_MonotoneIteration)->Arg(20)->Arg(50)->Arg(80)->Unit(benchmark::kMillisecond);

static void BM_MountainPass(benchmark::State& state)
{
    const GridPtr g = grid_1d(201);
    const SolverParams params;
    const double lambda = 0.5 * kLambdaStar;
    const Field lower = *monotone_iteration(0.9 * lambda, g, params).solution;
    const Field upper = *monotone_iteration(1.1 * lambda, g, params).solution;
    const Field utilde = minimize_truncated(lambda, lower, upper, params);
    const Field peak = default_peak(lambda, utilde, lower);
    for (auto _ : state) {
        MPOutcome o = mountain_pass(lambda, utilde, lower, peak, MountainPassParams{});
        benchmark::DoNotOptimize(o.level);
    }
}
BENCHMARK(BM_MountainPass)->Unit(benchmark::kMillisecond)->Iterations(2);

BENCHMARK_MAIN();
