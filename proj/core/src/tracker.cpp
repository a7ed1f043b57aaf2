#include "gcoach/tracker.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/text_metrics.hpp"

#include <algorithm>

namespace gcoach {

std::vector<Window> candidate_windows(const Chunk& chunk, long flow_index, std::size_t n) {
    const auto len = static_cast<long>(chunk.size());
    if (len == 0 || n == 0) return {};
    const auto norms = chunk.norms();
    if (static_cast<long>(n) >= len) return {Window{0, join_words(norms)}};

    const long first = flow_index < 0 ? 0 : std::max(0L, flow_index - kWindowBefore);
    const long last = std::min(len - static_cast<long>(n), (flow_index < 0 ? 0 : flow_index) + kWindowAfter);
    std::vector<Window> out;
    for (long p = first; p <= last; ++p) {
        out.push_back(Window{static_cast<std::size_t>(p),
                             join_words(std::span(norms).subspan(static_cast<std::size_t>(p), n))});
    }
    return out;
}

namespace {

void check_regions(const Chunk& chunk, std::span<const TrackedRegion> regions) {
    for (const auto& r : regions) {
        if (r.start > r.end || r.end >= chunk.size())
            throw RangeError("region '" + r.region_id + "' outside chunk '" + chunk.chunk_id + "'");
    }
}

std::vector<std::size_t> by_start(std::span<const TrackedRegion> regions) {
    std::vector<std::size_t> order(regions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return regions[a].start < regions[b].start; });
    return order;
}

std::vector<CueEvent> due_cues(SpeechFlowState& state, std::span<const TrackedRegion> regions,
                               const TrackerConfig& config) {
    std::vector<CueEvent> cues;
    for (auto i : by_start(regions)) {
        const auto& r = regions[i];
        if (state.fired.count(r.region_id)) continue;
        if (static_cast<long>(r.start) - config.onset_words > state.flow_index) continue;
        state.fired.insert(r.region_id);
        cues.push_back(CueEvent{r.region_id, r.clip_uri, state.flow_index, config.onset_words});
    }
    return cues;
}

} // namespace

RunStart start_run(const Chunk& chunk, std::span<const TrackedRegion> regions, std::string run_id,
                   const TrackerConfig& config) {
    check_regions(chunk, regions);
    RunStart out;
    out.state.run_id = std::move(run_id);
    out.state.chunk_id = chunk.chunk_id;
    for (auto i : by_start(regions)) {
        const auto& r = regions[i];
        if (static_cast<long>(r.start) < config.onset_words && !out.state.fired.count(r.region_id)) {
            out.state.fired.insert(r.region_id);
            out.cues.push_back(CueEvent{r.region_id, r.clip_uri, -1, config.onset_words});
        }
    }
    return out;
}

namespace {

void advance(SpeechFlowState& state, std::string norm, const Chunk& chunk, const TrackerConfig& config) {
    state.recent_words.push_back(std::move(norm));
    while (state.recent_words.size() > kPhraseWords) state.recent_words.pop_front();

    const std::vector<std::string> recent(state.recent_words.begin(), state.recent_words.end());
    const auto spoken = join_words(recent);
    const std::size_t n = std::min(recent.size(), chunk.size());

    double best = -1.0;
    std::size_t best_pos = 0;
    for (const auto& w : candidate_windows(chunk, state.flow_index, n)) {
        const double sigma = similarity_ratio(spoken, w.text).value();
        if (sigma > best) {
            best = sigma;
            best_pos = w.position;
        }
    }
    if (best >= config.threshold) {
        const long matched = static_cast<long>(best_pos + n) - 1;
        state.flow_index = std::max(state.flow_index, matched);
    }
}

} // namespace

std::vector<CueEvent> on_word(SpeechFlowState& state, std::string_view word, const Chunk& chunk,
                              std::span<const TrackedRegion> regions, const TrackerConfig& config) {
    if (chunk.empty()) return {};
    // Recognizers occasionally deliver several words at once.
    std::vector<CueEvent> cues;
    for (auto& norm : normalize_words(word)) {
        advance(state, std::move(norm), chunk, config);
        auto due = due_cues(state, regions, config);
        cues.insert(cues.end(), due.begin(), due.end());
    }
    return cues;
}

SpeechTracker::SpeechTracker(const Chunk& chunk, std::vector<TrackedRegion> regions, TrackerConfig config)
    : chunk_(chunk), regions_(std::move(regions)), config_(config) {
    check_regions(chunk_, regions_);
    state_.chunk_id = chunk_.chunk_id;
}

std::vector<CueEvent> SpeechTracker::start(std::string run_id) {
    auto run = start_run(chunk_, regions_, std::move(run_id), config_);
    state_ = std::move(run.state);
    return std::move(run.cues);
}

std::vector<CueEvent> SpeechTracker::on_word(std::string_view word) {
    return gcoach::on_word(state_, word, chunk_, regions_, config_);
}

} // namespace gcoach
