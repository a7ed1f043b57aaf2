#include "gcoach/embedding.hpp"
#include "gcoach/emphasis.hpp"

#include <benchmark/benchmark.h>

namespace {

const char* kText =
    "Cortisol is toxic to the brain when we live under stress for too long. One key reason why we gesture is to "
    "emphasize meaning for the audience. With rising prices we all feel the pressure every single day. On the other "
    "hand, there's nothing quite like a calm morning walk.";

void BM_filter_regions(benchmark::State& state) {
    const auto chunk = gcoach::chunk_notes(kText, 1000, "b").front();
    gcoach::StubEmbedder stub;
    const std::vector<gcoach::RawPrediction> preds{
        {"under stress", 0}, {"one key reason", 1}, {"rising price", 2}, {"quantum entanglement", 3}, {"calm walk", 4}};
    for (auto _ : state) benchmark::DoNotOptimize(gcoach::filter_regions(chunk, preds, stub));
}
BENCHMARK(BM_filter_regions);

} // namespace
