#pragma once

#include "gcoach/completion.hpp"
#include "gcoach/corpus.hpp"
#include "gcoach/embedding.hpp"
#include "gcoach/emphasis.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

inline constexpr std::string_view kSelectionSystemPrompt =
    "You are an expert in public speaking. You are given a TEXT and a QUERY phrase within the text that "
    "needs to be emphasized. Additionally, you are provided with CANDIDATE emphasis areas\" Your task is to "
    "identify the CANDIDATE emphasis phrase that is most similar to the QUERY phrase in the TEXT in terms of "
    "emphasis context. Always choose only from the provided list of CANDIDATES.";

inline constexpr std::size_t kDefaultCandidates = 3;

struct GestureCandidate {
    std::string entry_id;
    double similarity = 0.0;
    std::size_t rank = 1; // 1-based

    friend bool operator==(const GestureCandidate&, const GestureCandidate&) = default;
};

enum class SelectionSource { llm, fallback_rank1, user };

std::string_view to_string(SelectionSource source);
std::optional<SelectionSource> parse_selection_source(std::string_view s);

struct Recommendation {
    std::string region_id;
    std::vector<GestureCandidate> candidates;
    std::size_t selected_rank = 1;
    SelectionSource selection_source = SelectionSource::fallback_rank1;

    const GestureCandidate& selected() const { return candidates.at(selected_rank - 1); }
    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

// Throws InputError for empty text or an unindexed database; provider
// failures propagate as TransportError.
std::vector<GestureCandidate> retrieve_candidates(std::string_view region_text, const GestureDatabase& db,
                                                  Embedder& embedder, std::size_t k = kDefaultCandidates);

std::string build_selection_prompt(std::string_view chunk_text, std::string_view region_text,
                                   std::span<const GestureCandidate> candidates, const GestureDatabase& db);

// 1-based candidate chosen by a completion: a leading index, the exact
// candidate text, a contained candidate text, or a standalone index.
std::optional<std::size_t> parse_selection(std::string_view completion,
                                           std::span<const std::string> candidate_texts);

struct Selection {
    Recommendation recommendation;
    std::optional<std::string> warning;
};

// Always yields a recommendation; unparseable answers and provider failures
// fall back to rank 1.
Selection select_gesture(const GestureRegion& region, std::vector<GestureCandidate> candidates,
                         std::string_view chunk_text, CompletionProvider& provider, const GestureDatabase& db);

struct ChunkRecommendations {
    std::vector<Recommendation> recommendations;
    std::vector<std::string> warnings;
};

ChunkRecommendations recommend_chunk(const Chunk& chunk, const std::vector<GestureRegion>& regions,
                                     const GestureDatabase& db, Embedder& embedder, CompletionProvider& selector,
                                     std::size_t k = kDefaultCandidates);

} // namespace gcoach
