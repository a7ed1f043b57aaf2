#include "gcoach/embedding.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

void BM_knn(benchmark::State& state) {
    std::mt19937 rng(3);
    std::normal_distribution<double> normal;
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t dims = 256;
    gcoach::VectorIndex index(dims);
    auto draw = [&] {
        std::vector<double> v(dims);
        for (auto& x : v) x = normal(rng);
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) index.add("g" + std::to_string(i), draw());
    const auto query = draw();
    for (auto _ : state) benchmark::DoNotOptimize(index.knn(query, 3));
}
BENCHMARK(BM_knn)->Arg(343)->Arg(5000);

void BM_stub_embed(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(gcoach::stub_embed("the only thing that counts"));
}
BENCHMARK(BM_stub_embed);

} // namespace
