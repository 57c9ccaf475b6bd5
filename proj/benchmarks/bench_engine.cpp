#include <benchmark/benchmark.h>

#include <brwre/oracle.hpp>
#include <brwre/sim.hpp>

using namespace brwre;

static void BM_TrajectoryEnvB(benchmark::State& state) {
    RunConfig cfg;
    cfg.d = 3;
    cfg.horizon = state.range(0);
    cfg.env = env_preset("env-b");
    cfg.record_times = {cfg.horizon};
    cfg.thresholds.gaussian_multinomial_min = 512;
    uint64_t seed = 0;
    for (auto _ : state) {
        cfg.env_seed = ++seed;
        cfg.particle_seed = seed + 7777;
        benchmark::DoNotOptimize(run_trajectory(cfg).records.back().nbar);
    }
}
BENCHMARK(BM_TrajectoryEnvB)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_TwoWalkSeries(benchmark::State& state) {
    auto model = env_preset("env-b");
    for (auto _ : state)
        benchmark::DoNotOptimize(two_walk_series(model, 3, state.range(0)).u.back());
}
BENCHMARK(BM_TwoWalkSeries)->Arg(32)->Arg(96)->Unit(benchmark::kMillisecond);

static void BM_QuenchedMean(benchmark::State& state) {
    // deterministic law: the transfer spreads over the whole parity ball
    EnvironmentField field{env_preset("deterministic"), 9};
    for (auto _ : state)
        benchmark::DoNotOptimize(quenched_mean(field, 3, state.range(0)).zbar.back());
}
BENCHMARK(BM_QuenchedMean)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
