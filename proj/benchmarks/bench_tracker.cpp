#include "gcoach/tracker.hpp"

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

namespace {

gcoach::Chunk fixture_chunk() {
    std::ifstream in(GCOACH_FIXTURES_DIR "/tracker_chunk.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    return gcoach::chunk_notes(ss.str(), 1000000, "b").front();
}

// Cost of one recognized word, averaged over a faithful replay.
void BM_on_word(benchmark::State& state) {
    const auto chunk = fixture_chunk();
    const std::vector<gcoach::TrackedRegion> regions{{"a", 30, 32, "a.mp4"}, {"b", 120, 121, "b.mp4"}};
    std::size_t words = 0;
    for (auto _ : state) {
        gcoach::SpeechTracker tracker(chunk, regions);
        tracker.start();
        for (const auto& t : chunk.tokens) benchmark::DoNotOptimize(tracker.on_word(t.surface));
        words += chunk.size();
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(words));
}
BENCHMARK(BM_on_word);

} // namespace
