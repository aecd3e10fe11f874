#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "cipt/generators.hpp"
#include "cipt/permutation.hpp"
#include "cipt/seed.hpp"
#include "cipt/statistics.hpp"

namespace {

std::vector<cipt::CatPair> random_bin(std::size_t sigma, int ell1, int ell2,
                                      std::uint64_t seed) {
    cipt::Rng rng(seed);
    std::vector<cipt::CatPair> bin(sigma);
    for (cipt::CatPair& pair : bin) {
        pair.x = 1 + static_cast<std::int32_t>(rng.uniform_below(ell1));
        pair.y = 1 + static_cast<std::int32_t>(rng.uniform_below(ell2));
    }
    return bin;
}

void BM_u_stat_fast(benchmark::State& state) {
    auto bin = random_bin(static_cast<std::size_t>(state.range(0)), 3, 3, 17);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cipt::u_stat(bin, 3, 3));
    }
}
BENCHMARK(BM_u_stat_fast)->Arg(8)->Arg(32)->Arg(128)->Arg(512);

void BM_u_stat_naive(benchmark::State& state) {
    auto bin = random_bin(static_cast<std::size_t>(state.range(0)), 3, 3, 17);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cipt::u_stat_naive(bin, 3, 3));
    }
}
BENCHMARK(BM_u_stat_naive)->Arg(8)->Arg(16)->Arg(32);

void BM_run_test_mc(benchmark::State& state) {
    cipt::Rng rng(23);
    cipt::Dataset ds = cipt::gen_exp2_null(static_cast<std::size_t>(state.range(0)), 5, rng);
    cipt::TestConfig config;
    config.bins = 5;
    config.B = 100;
    config.seed = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cipt::run_test(ds, config));
    }
}
BENCHMARK(BM_run_test_mc)->Arg(100)->Arg(400);

void BM_run_test_cyclic(benchmark::State& state) {
    cipt::Rng rng(29);
    cipt::Dataset ds = cipt::gen_exp3(static_cast<std::size_t>(state.range(0)), 1.0, false, rng);
    cipt::TestConfig config;
    config.bins = 7;
    config.sub_bins = 7;
    config.perm = cipt::PermKind::cyclic;
    config.B = 100;
    config.seed = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cipt::run_test(ds, config));
    }
}
BENCHMARK(BM_run_test_cyclic)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
