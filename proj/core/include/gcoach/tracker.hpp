#pragma once

#include "gcoach/script.hpp"

#include <cstddef>
#include <deque>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

inline constexpr double kDefaultTrackerThreshold = 50.0;
inline constexpr int kDefaultOnsetWords = 4;
inline constexpr std::size_t kPhraseWords = 3;
inline constexpr long kWindowBefore = 2;
inline constexpr long kWindowAfter = 10;

struct TrackerConfig {
    double threshold = kDefaultTrackerThreshold; // similarity percent, compared with >=
    int onset_words = kDefaultOnsetWords;
};

// A region the tracker can cue, resolved to the clip it should play.
struct TrackedRegion {
    std::string region_id;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string clip_uri;
};

struct SpeechFlowState {
    std::string run_id;
    std::string chunk_id;
    long flow_index = -1; // last word of the last confident match
    std::deque<std::string> recent_words;
    std::set<std::string> fired;
};

struct CueEvent {
    std::string region_id;
    std::string clip_uri;
    long triggered_at_flow_index = -1;
    int onset_words = kDefaultOnsetWords;

    friend bool operator==(const CueEvent&, const CueEvent&) = default;
};

struct Window {
    std::size_t position = 0;
    std::string text;
};

// n-gram windows starting two words before through ten words after the flow
// index (0..10 before any match). Chunks shorter than n yield one window of
// the whole chunk.
std::vector<Window> candidate_windows(const Chunk& chunk, long flow_index, std::size_t n = kPhraseWords);

struct RunStart {
    SpeechFlowState state;
    std::vector<CueEvent> cues; // regions too close to the start to be cued in time
};

RunStart start_run(const Chunk& chunk, std::span<const TrackedRegion> regions, std::string run_id = {},
                   const TrackerConfig& config = {});

// Applies one recognized word. Words that normalize to nothing are ignored.
std::vector<CueEvent> on_word(SpeechFlowState& state, std::string_view word, const Chunk& chunk,
                              std::span<const TrackedRegion> regions, const TrackerConfig& config = {});

// Convenience owner of one run's inputs and state.
class SpeechTracker {
public:
    SpeechTracker(const Chunk& chunk, std::vector<TrackedRegion> regions, TrackerConfig config = {});

    std::vector<CueEvent> start(std::string run_id = {});
    std::vector<CueEvent> on_word(std::string_view word);

    const SpeechFlowState& state() const noexcept { return state_; }
    const std::vector<TrackedRegion>& regions() const noexcept { return regions_; }

private:
    const Chunk& chunk_;
    std::vector<TrackedRegion> regions_;
    TrackerConfig config_;
    SpeechFlowState state_;
};

} // namespace gcoach
