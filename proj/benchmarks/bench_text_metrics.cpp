#include "gcoach/text_metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <string>

namespace {

std::string random_text(std::mt19937& rng, std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>('a' + rng() % 26));
    return s;
}

void BM_levenshtein(benchmark::State& state) {
    std::mt19937 rng(1);
    const auto len = static_cast<std::size_t>(state.range(0));
    const auto a = random_text(rng, len);
    const auto b = random_text(rng, len);
    for (auto _ : state) benchmark::DoNotOptimize(gcoach::levenshtein_distance(a, b));
}
BENCHMARK(BM_levenshtein)->Arg(8)->Arg(20)->Arg(40)->Arg(160);

void BM_similarity_ratio(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(gcoach::similarity_ratio("one key reason", "one key season"));
}
BENCHMARK(BM_similarity_ratio);

} // namespace
