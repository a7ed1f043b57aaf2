#pragma once

#include "gcoach/corpus.hpp"
#include "gcoach/embedding.hpp"
#include "gcoach/script.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

// A prediction may extend at most this many words beyond its gold region.
inline constexpr std::size_t kLengthSlackWords = 3;
inline constexpr double kDefaultSemanticThreshold = 0.75;

struct EvalSample {
    std::string sample_id;
    Chunk chunk;
    std::vector<Span> gold;
    std::vector<std::string> predictions; // parsed, unfiltered phrases
};

// Locates each gold phrase at its earliest occurrence not overlapping an
// earlier gold. Throws InputError when a gold phrase cannot be placed.
EvalSample make_eval_sample(const AnnotatedSample& gold, std::vector<std::string> predictions);

// Verbatim location of a prediction; nullopt marks it invalid.
std::optional<Span> locate_prediction(const Chunk& chunk, std::string_view phrase);

bool within_length(const Span& prediction, const Span& gold) noexcept;

// Gold sharing at least one word with the prediction and passing the length
// rule; maximal overlap wins, ties to the earliest gold. Golds flagged in
// `claimed` are skipped.
std::optional<std::size_t> match_direct(const Span& located, std::span<const Span> golds,
                                        const std::vector<bool>& claimed = {});

// Gold with the highest embedding cosine >= threshold that passes the length
// rule, ties to the earliest gold. Embedding failures propagate.
std::optional<std::size_t> match_semantic(const Span& located, std::span<const Span> golds, Embedder& embedder,
                                          double threshold = kDefaultSemanticThreshold,
                                          const std::vector<bool>& claimed = {});

enum class MatchScheme { direct, semantic };

std::string_view to_string(MatchScheme scheme);

struct MatchPair {
    std::string sample_id;
    std::size_t prediction = 0; // index into EvalSample::predictions
    std::size_t gold = 0;       // index into EvalSample::gold

    friend auto operator<=>(const MatchPair&, const MatchPair&) = default;
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t invalid = 0;
    std::size_t samples = 0;  // scored samples
    std::size_t unscored = 0; // samples skipped after an embedding failure
    double mean_pred_regions = 0.0;
    double mean_pred_length_words = 0.0;
    bool degenerate = false; // precision or recall had an empty denominator
    std::vector<MatchPair> matches;
};

// Semantic scoring first claims golds by direct matching, then matches the
// remaining predictions semantically, so every direct match is also counted
// under the semantic scheme.
Metrics score(std::span<const EvalSample> samples, MatchScheme scheme, Embedder* embedder = nullptr,
              double threshold = kDefaultSemanticThreshold);

struct ModelReport {
    std::optional<Metrics> direct;
    std::optional<Metrics> semantic;
};

// Rows sorted by model name.
std::string format_report(const std::map<std::string, ModelReport>& reports);
nlohmann::ordered_json report_json(const std::map<std::string, ModelReport>& reports);

} // namespace gcoach
