#include "gcoach/text_metrics.hpp"
#include "gcoach/tracker.hpp"

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace gcoach;

namespace {

std::string random_word(std::mt19937& rng, std::size_t len) {
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng() % 26));
    return w;
}

std::vector<std::size_t> positions(const std::vector<Window>& windows) {
    std::vector<std::size_t> out;
    for (const auto& w : windows) out.push_back(w.position);
    return out;
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out;
    for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    return out;
}

Chunk numbered_chunk(std::size_t words) {
    std::string text;
    for (std::size_t i = 0; i < words; ++i) text += "w" + std::to_string(i) + " ";
    return testing::single_chunk(text);
}

} // namespace

TEST_SUITE("tracker") {

TEST_CASE("start of a run cues only regions too close to the start") {
    const auto chunk = numbered_chunk(30);
    const std::vector<TrackedRegion> late{{"late", 10, 11, "c.mp4"}};
    auto run = start_run(chunk, late, "r1");
    CHECK(run.cues.empty());
    CHECK(run.state.flow_index == -1);
    CHECK(run.state.run_id == "r1");
    CHECK(run.state.recent_words.empty());

    const std::vector<TrackedRegion> early{{"early", 2, 3, "e.mp4"}, {"late", 10, 11, "c.mp4"}};
    run = start_run(chunk, early);
    REQUIRE(run.cues.size() == 1);
    CHECK(run.cues[0] == CueEvent{"early", "e.mp4", -1, 4});
    CHECK(run.state.fired.count("early") == 1);

    CHECK(start_run(chunk, {}).cues.empty());
}

TEST_CASE("candidate windows follow the flow index") {
    const auto c100 = numbered_chunk(100);
    CHECK(positions(candidate_windows(c100, 20)) == range(18, 30));
    CHECK(positions(candidate_windows(c100, -1)) == range(0, 10));
    CHECK(positions(candidate_windows(c100, 0)) == range(0, 10));
    CHECK(positions(candidate_windows(numbered_chunk(50), 47)) == range(45, 47));
    CHECK(candidate_windows(c100, 20)[0].text == "w18 w19 w20");

    const auto tiny = numbered_chunk(2);
    const auto w = candidate_windows(tiny, -1);
    REQUIRE(w.size() == 1);
    CHECK(w[0].text == "w0 w1");
}

TEST_CASE("worked example: three words, then a filler") {
    const auto chunk = testing::single_chunk("one key reason why we gesture is to emphasize meaning here today");
    const std::vector<TrackedRegion> regions{{"r6", 6, 7, "g.mp4"}};
    SpeechTracker tracker(chunk, regions);
    tracker.start("run");
    CHECK(tracker.on_word("one").empty());
    CHECK(tracker.on_word("key").empty());
    const auto cues = tracker.on_word("reason");
    CHECK(tracker.state().flow_index == 2);
    REQUIRE(cues.size() == 1);
    CHECK(cues[0].region_id == "r6");
    CHECK(cues[0].triggered_at_flow_index == 2);

    // "key reason um" is close to "key reason why" (sigma 88.9), so even the
    // filler is read as progress to word 3.
    const std::deque<std::string> recent{"key", "reason", "um"};
    const long expected = oracle::tracker_step(chunk.norms(), 2, recent, 50.0);
    CHECK(similarity_ratio("key reason um", "key reason why").value() == doctest::Approx(100.0 * (1 - 3.0 / 27)));
    CHECK(tracker.on_word("um").empty());
    CHECK(tracker.state().flow_index == expected);
    CHECK(expected == 3);
}

TEST_CASE("a filler far from every window leaves the flow index alone") {
    const auto chunk = testing::single_chunk("one key reason why we gesture is to emphasize meaning here today");
    SpeechTracker tracker(chunk, {});
    tracker.start();
    for (const char* w : {"one", "key", "reason", "xylophonically", "zzzzqqqqvvvv", "pppppppppkkkkk"}) tracker.on_word(w);
    std::deque<std::string> recent{"xylophonically", "zzzzqqqqvvvv", "pppppppppkkkkk"};
    CHECK(oracle::tracker_step(chunk.norms(), 2, recent, 50.0) == 2);
    CHECK(tracker.state().flow_index <= 4);
    const auto before = tracker.state().flow_index;
    tracker.on_word("qqqqqqqqqqqq");
    CHECK(tracker.state().flow_index == before);
}

TEST_CASE("faithful replay advances one word at a time") {
    const auto chunk = testing::single_chunk(testing::read_text(testing::fixture("tracker_chunk.txt")));
    REQUIRE(chunk.size() == 200);
    SpeechTracker tracker(chunk, {});
    tracker.start();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
        tracker.on_word(chunk.tokens[i].surface);
        CHECK(tracker.state().flow_index == static_cast<long>(i));
        CHECK(tracker.state().recent_words.size() == std::min<std::size_t>(i + 1, 3));
    }
}

TEST_CASE("noise words from a fresh run never move the flow index") {
    // Chunk words of at most two letters keep every sigma below 50 against
    // eight-letter noise, whatever the phrase length.
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 500; ++trial) {
        std::string text;
        const std::size_t n = 5 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) text += random_word(rng, 1 + rng() % 2) + " ";
        const auto chunk = testing::single_chunk(text);
        SpeechTracker tracker(chunk, {});
        tracker.start();
        for (int k = 0; k < 20; ++k) {
            tracker.on_word(random_word(rng, 8));
            REQUIRE(tracker.state().flow_index == -1);
        }
    }
}

TEST_CASE("once the buffer holds only noise the flow index stays put") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        std::string text;
        const std::size_t n = 10 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) text += random_word(rng, 1 + rng() % 2) + " ";
        const auto chunk = testing::single_chunk(text);
        SpeechTracker tracker(chunk, {});
        tracker.start();
        const std::size_t prefix = rng() % chunk.size();
        for (std::size_t i = 0; i < prefix; ++i) tracker.on_word(chunk.tokens[i].surface);
        for (int k = 0; k < 3; ++k) tracker.on_word(random_word(rng, 8));
        const auto settled = tracker.state().flow_index;
        for (int k = 0; k < 10; ++k) {
            tracker.on_word(random_word(rng, 8));
            REQUIRE(tracker.state().flow_index == settled);
        }
    }
}

TEST_CASE("flow index is monotone, bounded per step and matches the oracle") {
    std::mt19937 rng(5);
    const auto chunk = testing::single_chunk(testing::read_text(testing::fixture("tracker_chunk.txt")));
    const auto norms = chunk.norms();
    for (int trial = 0; trial < 30; ++trial) {
        SpeechTracker tracker(chunk, {});
        tracker.start();
        long flow = -1;
        std::deque<std::string> recent;
        std::size_t pos = rng() % 20;
        for (int step = 0; step < 120; ++step) {
            std::string word;
            switch (rng() % 5) {
            case 0: word = random_word(rng, 1 + rng() % 8); break;
            case 1: pos += rng() % 4; [[fallthrough]];
            default: word = chunk.tokens[pos++ % chunk.size()].surface;
            }
            tracker.on_word(word);
            recent.push_back(normalize_word(word));
            if (recent.size() > 3) recent.pop_front();
            const long next = oracle::tracker_step(norms, flow, recent, 50.0);
            CHECK(tracker.state().flow_index == next);
            CHECK(next >= flow);
            CHECK(next - std::max(flow, 0L) <= 12);
            flow = next;
        }
    }
}

TEST_CASE("cues fire once each and replays are deterministic") {
    const auto chunk = testing::single_chunk(testing::read_text(testing::fixture("tracker_chunk.txt")));
    const std::vector<TrackedRegion> regions{{"a", 1, 2, "a.mp4"}, {"b", 30, 32, "b.mp4"}, {"c", 100, 101, "c.mp4"},
                                             {"d", 199, 199, "d.mp4"}};
    auto replay = [&] {
        SpeechTracker tracker(chunk, regions);
        std::vector<CueEvent> cues = tracker.start("x");
        std::vector<long> flows;
        for (const auto& t : chunk.tokens) {
            for (auto& c : tracker.on_word(t.surface)) cues.push_back(c);
            flows.push_back(tracker.state().flow_index);
        }
        return std::make_pair(cues, flows);
    };
    const auto [cues, flows] = replay();
    REQUIRE(cues.size() == 4);
    CHECK(cues[0].triggered_at_flow_index == -1);
    CHECK(cues[1].triggered_at_flow_index == 26);
    CHECK(cues[2].triggered_at_flow_index == 96);
    CHECK(cues[3].triggered_at_flow_index == 195);
    CHECK(replay() == std::make_pair(cues, flows));
}

TEST_CASE("words that normalize to nothing are ignored") {
    const auto chunk = numbered_chunk(10);
    SpeechTracker tracker(chunk, {});
    tracker.start();
    tracker.on_word("--");
    CHECK(tracker.state().recent_words.empty());
    tracker.on_word("w0 w1");
    CHECK(tracker.state().recent_words.size() == 2);
    CHECK(tracker.state().flow_index == 1);
}

} // TEST_SUITE
