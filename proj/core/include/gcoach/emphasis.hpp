#pragma once

#include "gcoach/completion.hpp"
#include "gcoach/embedding.hpp"
#include "gcoach/script.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

inline constexpr std::string_view kEmphasisSystemPrompt =
    "You are an expert in public speaking. The provided Text will be used for a TED talk. "
    "Identify the Emphasis Areas in the Text that should emphasized when giving the TED talk."
    "The extracted text in the Emphasis Areas should exactly match phrases in the given Text.";

inline constexpr double kDefaultFilterThreshold = 0.75;

enum class RegionSource { verbatim_match, semantic_match };
enum class RegionStatus { proposed, accepted, edited, deleted };

std::string_view to_string(RegionSource source);
std::string_view to_string(RegionStatus status);
std::optional<RegionSource> parse_region_source(std::string_view s);
std::optional<RegionStatus> parse_region_status(std::string_view s);

struct RawPrediction {
    std::string phrase;
    std::size_t order = 0;
};

struct GestureRegion {
    std::string region_id;
    Span span;
    RegionSource source = RegionSource::verbatim_match;
    double match_similarity = 1.0;
    RegionStatus status = RegionStatus::proposed;
};

struct DiscardedPrediction {
    std::string phrase;
    double best_score = 0.0; // best window cosine, 0 when never scored
    std::string reason;
};

struct FilterResult {
    std::vector<GestureRegion> regions;
    std::vector<DiscardedPrediction> discarded;
    std::vector<std::string> warnings;
};

std::string region_id_for(const Span& span);

// Throws InputError for an empty chunk.
std::string build_emphasis_prompt(const Chunk& chunk, InstructionFrame frame = InstructionFrame::plain);

// Numbered lists ("1) ..", "1. .."), bulleted lines, or quoted fragments, in
// that order of preference. Anything else yields no predictions.
std::vector<RawPrediction> parse_region_strings(std::string_view completion);

// Verbatim n-gram match first, else best sliding window by embedding cosine
// accepted at >= threshold; regions overlapping an earlier one are dropped.
FilterResult filter_regions(const Chunk& chunk, const std::vector<RawPrediction>& predictions,
                            Embedder& embedder, double threshold = kDefaultFilterThreshold);

// prompt -> complete -> parse -> filter. Throws PipelineError when the
// completion provider is unreachable.
FilterResult propose_regions(const Chunk& chunk, CompletionProvider& provider, Embedder& embedder,
                             double threshold = kDefaultFilterThreshold);

} // namespace gcoach
