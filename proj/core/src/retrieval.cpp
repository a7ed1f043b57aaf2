#include "gcoach/retrieval.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/script.hpp"

#include <spdlog/spdlog.h>

#include <cctype>

namespace gcoach {

std::string_view to_string(SelectionSource source) {
    switch (source) {
    case SelectionSource::llm: return "llm";
    case SelectionSource::fallback_rank1: return "fallback-rank1";
    case SelectionSource::user: return "user";
    }
    return "llm";
}

std::optional<SelectionSource> parse_selection_source(std::string_view s) {
    if (s == "llm") return SelectionSource::llm;
    if (s == "fallback-rank1") return SelectionSource::fallback_rank1;
    if (s == "user") return SelectionSource::user;
    return std::nullopt;
}

std::vector<GestureCandidate> retrieve_candidates(std::string_view region_text, const GestureDatabase& db,
                                                  Embedder& embedder, std::size_t k) {
    if (normalize_phrase(region_text).empty()) throw InputError("empty region text");
    if (!db.indexed()) throw InputError("gesture database has no embedding index");
    const auto query = embedder.embed(region_text);
    std::vector<GestureCandidate> out;
    for (const auto& n : db.index().knn(query.values, k))
        out.push_back(GestureCandidate{n.entry_id, n.score, out.size() + 1});
    return out;
}

std::string build_selection_prompt(std::string_view chunk_text, std::string_view region_text,
                                   std::span<const GestureCandidate> candidates, const GestureDatabase& db) {
    if (candidates.empty()) throw InputError("selection prompt needs at least one candidate");
    std::string prompt(kSelectionSystemPrompt);
    prompt.append(" TEXT: ").append(chunk_text);
    prompt.append("; QUERY: ").append(region_text);
    prompt.append("; CANDIDATES:");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto* entry = db.find(candidates[i].entry_id);
        if (!entry) throw NotFoundError("candidate '" + candidates[i].entry_id + "' not in database");
        prompt.append(" ").append(std::to_string(i + 1)).append(") ").append(entry->region_text);
    }
    prompt.append(". Give only the candidate as output.");
    return prompt;
}

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

std::optional<std::size_t> leading_index(std::string_view s, std::size_t n) {
    while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) || s.front() == '(' ||
                          s.front() == '[' || s.front() == '#'))
        s.remove_prefix(1);
    std::size_t len = 0;
    while (len < s.size() && std::isdigit(static_cast<unsigned char>(s[len]))) ++len;
    if (len == 0 || len > 3) return std::nullopt;
    if (len < s.size()) {
        const char next = s[len];
        if (next != ')' && next != '.' && next != ':' && next != ']' && !std::isspace(static_cast<unsigned char>(next)))
            return std::nullopt;
    }
    const auto value = static_cast<std::size_t>(std::stoul(std::string(s.substr(0, len))));
    if (value >= 1 && value <= n) return value;
    return std::nullopt;
}

bool contains_words(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t p = 0; p + needle.size() <= hay.size(); ++p) {
        bool hit = true;
        for (std::size_t j = 0; j < needle.size() && hit; ++j) hit = hay[p + j] == needle[j];
        if (hit) return true;
    }
    return false;
}

} // namespace

std::optional<std::size_t> parse_selection(std::string_view completion, std::span<const std::string> candidate_texts) {
    const std::size_t n = candidate_texts.size();
    if (n == 0) return std::nullopt;
    if (auto idx = leading_index(completion, n)) return idx;

    const auto words = normalize_words(completion);
    std::vector<std::vector<std::string>> cands;
    for (const auto& c : candidate_texts) cands.push_back(normalize_words(c));

    for (std::size_t i = 0; i < n; ++i)
        if (!cands[i].empty() && cands[i] == words) return i + 1;

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
        if (!contains_words(words, cands[i])) continue;
        if (!best || cands[i].size() > cands[*best - 1].size()) best = i + 1;
    }
    if (best) return best;

    for (const auto& w : words) {
        if (!all_digits(w) || w.size() > 3) continue;
        const auto value = static_cast<std::size_t>(std::stoul(w));
        if (value >= 1 && value <= n) return value;
    }
    return std::nullopt;
}

Selection select_gesture(const GestureRegion& region, std::vector<GestureCandidate> candidates,
                         std::string_view chunk_text, CompletionProvider& provider, const GestureDatabase& db) {
    if (candidates.empty()) throw InputError("select_gesture needs at least one candidate");
    Selection out;
    out.recommendation.region_id = region.region_id;

    std::vector<std::string> texts;
    for (const auto& c : candidates) {
        const auto* entry = db.find(c.entry_id);
        texts.push_back(entry ? entry->region_text : std::string{});
    }
    const auto prompt = build_selection_prompt(chunk_text, region.span.text, candidates, db);
    out.recommendation.candidates = std::move(candidates);

    try {
        const auto completion = provider.complete(prompt);
        if (auto rank = parse_selection(completion, texts)) {
            out.recommendation.selected_rank = *rank;
            out.recommendation.selection_source = SelectionSource::llm;
            return out;
        }
        out.warning = "selector answer names no listed candidate; using rank 1";
    } catch (const TransportError& e) {
        out.warning = std::string("selector unavailable (") + e.what() + "); using rank 1";
    }
    spdlog::warn("{}: {}", region.region_id, *out.warning);
    out.recommendation.selected_rank = 1;
    out.recommendation.selection_source = SelectionSource::fallback_rank1;
    return out;
}

ChunkRecommendations recommend_chunk(const Chunk& chunk, const std::vector<GestureRegion>& regions,
                                     const GestureDatabase& db, Embedder& embedder, CompletionProvider& selector,
                                     std::size_t k) {
    if (!db.indexed()) throw InputError("gesture database has no embedding index");
    ChunkRecommendations out;
    for (const auto& region : regions) {
        if (region.status == RegionStatus::deleted) continue;
        if (region.span.chunk_id != chunk.chunk_id)
            throw InputError("region '" + region.region_id + "' does not belong to chunk '" + chunk.chunk_id + "'");
        std::vector<GestureCandidate> candidates;
        try {
            candidates = retrieve_candidates(region.span.text, db, embedder, k);
        } catch (const TransportError& e) {
            out.warnings.push_back(region.region_id + ": retrieval failed: " + e.what());
            continue;
        }
        auto sel = select_gesture(region, std::move(candidates), chunk.raw_text, selector, db);
        if (sel.warning) out.warnings.push_back(region.region_id + ": " + *sel.warning);
        out.recommendations.push_back(std::move(sel.recommendation));
    }
    return out;
}

} // namespace gcoach
