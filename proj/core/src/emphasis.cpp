#include "gcoach/emphasis.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/hashing.hpp"
#include "gcoach/text_metrics.hpp"

#include <spdlog/spdlog.h>

#include <cctype>
#include <unordered_set>

namespace gcoach {

std::string_view to_string(RegionSource source) {
    return source == RegionSource::verbatim_match ? "verbatim-match" : "semantic-match";
}

std::string_view to_string(RegionStatus status) {
    switch (status) {
    case RegionStatus::proposed: return "proposed";
    case RegionStatus::accepted: return "accepted";
    case RegionStatus::edited: return "edited";
    case RegionStatus::deleted: return "deleted";
    }
    return "proposed";
}

std::optional<RegionSource> parse_region_source(std::string_view s) {
    if (s == "verbatim-match") return RegionSource::verbatim_match;
    if (s == "semantic-match") return RegionSource::semantic_match;
    return std::nullopt;
}

std::optional<RegionStatus> parse_region_status(std::string_view s) {
    if (s == "proposed") return RegionStatus::proposed;
    if (s == "accepted") return RegionStatus::accepted;
    if (s == "edited") return RegionStatus::edited;
    if (s == "deleted") return RegionStatus::deleted;
    return std::nullopt;
}

std::string region_id_for(const Span& span) {
    return content_id("r", {span.chunk_id, std::to_string(span.start), std::to_string(span.end), span.text});
}

std::string build_emphasis_prompt(const Chunk& chunk, InstructionFrame frame) {
    if (chunk.empty()) throw InputError("cannot build an emphasis prompt for an empty chunk");
    std::string prompt;
    switch (frame) {
    case InstructionFrame::plain:
        prompt.append(kEmphasisSystemPrompt).append("\n\nText: ").append(chunk.raw_text);
        break;
    case InstructionFrame::llama2_chat:
        prompt.append("<s>[INST] <<SYS>> ")
            .append(kEmphasisSystemPrompt)
            .append(" <</SYS>> Text: ")
            .append(chunk.raw_text)
            .append(" [/INST]");
        break;
    }
    return prompt;
}

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Strips whitespace, quotes and edge punctuation.
std::string clean_phrase(std::string_view s) {
    static constexpr std::string_view kAscii = " \t\r\n\"'`,.;:!?*";
    static constexpr std::string_view kWide[] = {"“", "”", "‘", "’", "…"};
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        if (kAscii.find(s.front()) != std::string_view::npos) {
            s.remove_prefix(1);
            changed = true;
        }
        if (!s.empty() && kAscii.find(s.back()) != std::string_view::npos) {
            s.remove_suffix(1);
            changed = true;
        }
        for (auto w : kWide) {
            if (s.starts_with(w)) {
                s.remove_prefix(w.size());
                changed = true;
            }
            if (s.ends_with(w)) {
                s.remove_suffix(w.size());
                changed = true;
            }
        }
    }
    return std::string(s);
}

struct Marker {
    std::size_t begin; // first byte of the marker
    std::size_t body;  // first byte after marker and its trailing space
};

// Finds "N)" or "N." at a word start followed by whitespace.
std::optional<Marker> find_marker(std::string_view text, std::size_t from, int number) {
    const auto digits = std::to_string(number);
    for (std::size_t pos = text.find(digits, from); pos != std::string_view::npos;
         pos = text.find(digits, pos + 1)) {
        if (pos > 0 && !is_blank(text[pos - 1]) && text[pos - 1] != ':' && text[pos - 1] != '(') continue;
        const std::size_t after = pos + digits.size();
        if (after >= text.size() || (text[after] != ')' && text[after] != '.')) continue;
        if (after + 1 < text.size() && !is_blank(text[after + 1])) continue;
        std::size_t body = after + 1;
        while (body < text.size() && (text[body] == ' ' || text[body] == '\t')) ++body;
        return Marker{pos, body};
    }
    return std::nullopt;
}

std::vector<std::string> numbered_items(std::string_view text) {
    std::vector<std::string> items;
    auto current = find_marker(text, 0, 1);
    int number = 1;
    while (current) {
        auto next = find_marker(text, current->body, ++number);
        std::size_t end = next ? next->begin : text.size();
        const auto nl = text.find('\n', current->body);
        if (nl != std::string_view::npos && nl < end) end = nl;
        items.emplace_back(text.substr(current->body, end - current->body));
        current = next;
    }
    return items;
}

std::vector<std::string> bulleted_items(std::string_view text) {
    std::vector<std::string> items;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        for (std::string_view bullet : {"- ", "* ", "+ ", "• "}) {
            if (line.starts_with(bullet)) {
                items.emplace_back(line.substr(bullet.size()));
                break;
            }
        }
        pos = nl + 1;
    }
    return items;
}

std::vector<std::string> quoted_items(std::string_view text) {
    std::vector<std::string> items;
    const std::pair<std::string_view, std::string_view> pairs[] = {{"\"", "\""}, {"“", "”"}};
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t best = std::string_view::npos;
        const std::pair<std::string_view, std::string_view>* used = nullptr;
        for (const auto& p : pairs) {
            auto at = text.find(p.first, pos);
            if (at < best) {
                best = at;
                used = &p;
            }
        }
        if (!used) break;
        const auto open_end = best + used->first.size();
        const auto close = text.find(used->second, open_end);
        if (close == std::string_view::npos) break;
        items.emplace_back(text.substr(open_end, close - open_end));
        pos = close + used->second.size();
    }
    return items;
}

} // namespace

std::vector<RawPrediction> parse_region_strings(std::string_view completion) {
    auto items = numbered_items(completion);
    if (items.empty()) items = bulleted_items(completion);
    if (items.empty()) items = quoted_items(completion);

    std::vector<RawPrediction> out;
    std::unordered_set<std::string> seen;
    for (const auto& item : items) {
        auto phrase = clean_phrase(item);
        if (phrase.empty() || !seen.insert(phrase).second) continue;
        out.push_back(RawPrediction{std::move(phrase), out.size()});
    }
    return out;
}

FilterResult filter_regions(const Chunk& chunk, const std::vector<RawPrediction>& predictions,
                            Embedder& embedder, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw InputError("filter threshold must be in (0, 1]");
    FilterResult result;
    const auto norms = chunk.norms();

    for (const auto& pred : predictions) {
        const auto words = normalize_words(pred.phrase);
        if (words.empty()) {
            result.discarded.push_back({pred.phrase, 0.0, "empty after normalization"});
            continue;
        }
        if (words.size() > chunk.size()) {
            result.discarded.push_back({pred.phrase, 0.0, "longer than the chunk"});
            continue;
        }

        std::optional<GestureRegion> region;
        if (auto p = locate_words(chunk, words)) {
            auto span = make_span(chunk, *p, *p + words.size() - 1);
            region = GestureRegion{region_id_for(span), std::move(span), RegionSource::verbatim_match, 1.0,
                                   RegionStatus::proposed};
        } else {
            const std::size_t n = words.size();
            std::vector<std::string> windows;
            for (std::size_t p = 0; p + n <= norms.size(); ++p)
                windows.push_back(join_words(std::span(norms).subspan(p, n)));
            std::vector<EmbeddingVector> window_vecs;
            EmbeddingVector query;
            try {
                query = embedder.embed(join_words(words));
                window_vecs = embedder.embed_many(windows);
            } catch (const Error& e) {
                const auto msg = "embedding failed for '" + pred.phrase + "': " + e.what();
                spdlog::warn("{}: {}", chunk.chunk_id, msg);
                result.warnings.push_back(msg);
                continue;
            }
            double best = -2.0;
            std::size_t best_pos = 0;
            for (std::size_t p = 0; p < window_vecs.size(); ++p) {
                if (query.degenerate || window_vecs[p].degenerate) continue;
                const double score = cosine_similarity(query.values, window_vecs[p].values);
                if (score > best) {
                    best = score;
                    best_pos = p;
                }
            }
            if (best >= threshold) {
                auto span = make_span(chunk, best_pos, best_pos + n - 1);
                region = GestureRegion{region_id_for(span), std::move(span), RegionSource::semantic_match, best,
                                       RegionStatus::proposed};
            } else {
                const double shown = best < -1.0 ? 0.0 : best;
                spdlog::debug("{}: discarded '{}' (best window cosine {:.4f})", chunk.chunk_id, pred.phrase, shown);
                result.discarded.push_back({pred.phrase, shown, "below similarity threshold"});
                continue;
            }
        }

        bool overlaps = false;
        for (const auto& kept : result.regions) overlaps = overlaps || kept.span.overlaps(region->span);
        if (overlaps) {
            result.discarded.push_back({pred.phrase, region->match_similarity, "overlaps an earlier region"});
            continue;
        }
        result.regions.push_back(std::move(*region));
    }
    return result;
}

FilterResult propose_regions(const Chunk& chunk, CompletionProvider& provider, Embedder& embedder,
                             double threshold) {
    const auto prompt = build_emphasis_prompt(chunk, provider.frame());
    std::string completion;
    try {
        completion = provider.complete(prompt);
    } catch (const TransportError& e) {
        throw PipelineError(std::string("emphasis provider failed: ") + e.what(), chunk.chunk_id);
    }
    return filter_regions(chunk, parse_region_strings(completion), embedder, threshold);
}

} // namespace gcoach
