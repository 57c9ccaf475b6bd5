#include <benchmark/benchmark.h>

#include <brwre/env.hpp>
#include <brwre/rng.hpp>
#include <brwre/sampling.hpp>

using namespace brwre;

static void BM_Splitmix64(benchmark::State& state) {
    uint64_t x = 1;
    for (auto _ : state) {
        x = splitmix64(x);
        benchmark::DoNotOptimize(x);
    }
}
BENCHMARK(BM_Splitmix64);

static void BM_FieldAtomLookup(benchmark::State& state) {
    EnvironmentField field{env_preset("env-b"), 42};
    int32_t x[3] = {5, -3, 8};
    long t = 0;
    for (auto _ : state) {
        x[0] = static_cast<int32_t>(t & 63);
        benchmark::DoNotOptimize(field.atom_at(t++, std::span<const int32_t>(x, 3)));
    }
}
BENCHMARK(BM_FieldAtomLookup);

static void BM_BinomialInversion(benchmark::State& state) {
    Xoshiro256pp rng(7);
    for (auto _ : state)
        benchmark::DoNotOptimize(draw_binomial(rng, 100, 1.0 / 6));
}
BENCHMARK(BM_BinomialInversion);

static void BM_BinomialBtrs(benchmark::State& state) {
    Xoshiro256pp rng(7);
    for (auto _ : state)
        benchmark::DoNotOptimize(draw_binomial(rng, static_cast<uint64_t>(state.range(0)),
                                               1.0 / 6));
}
BENCHMARK(BM_BinomialBtrs)->Arg(1000)->Arg(100000)->Arg(10000000);

static void BM_DirectionMultinomial(benchmark::State& state) {
    Xoshiro256pp rng(7);
    std::vector<double> probs(6, 1.0 / 6);
    std::vector<uint64_t> counts(6);
    const uint64_t n = static_cast<uint64_t>(state.range(0));
    for (auto _ : state) {
        draw_multinomial(rng, n, probs, counts, 1000000, nullptr);
        benchmark::DoNotOptimize(counts[0]);
    }
}
BENCHMARK(BM_DirectionMultinomial)->Arg(100)->Arg(10000)->Arg(100000000);

BENCHMARK_MAIN();
