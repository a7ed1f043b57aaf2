#include "gcoach/eval.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/text_metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace gcoach {

EvalSample make_eval_sample(const AnnotatedSample& gold, std::vector<std::string> predictions) {
    EvalSample s;
    s.sample_id = gold.sample_id;
    s.chunk.chunk_id = gold.sample_id;
    s.chunk.raw_text = gold.text;
    s.chunk.tokens = tokenize(gold.text);
    s.predictions = std::move(predictions);
    for (const auto& phrase : gold.regions) {
        const auto words = normalize_words(phrase);
        std::optional<Span> placed;
        for (auto p = locate_words(s.chunk, words); p; p = locate_words(s.chunk, words, *p + 1)) {
            auto span = make_span(s.chunk, *p, *p + words.size() - 1);
            const bool clash = std::any_of(s.gold.begin(), s.gold.end(), [&](const Span& g) { return g.overlaps(span); });
            if (!clash) {
                placed = std::move(span);
                break;
            }
        }
        if (!placed) throw InputError("sample '" + gold.sample_id + "': gold region '" + phrase + "' cannot be placed");
        s.gold.push_back(std::move(*placed));
    }
    return s;
}

std::optional<Span> locate_prediction(const Chunk& chunk, std::string_view phrase) {
    return locate_phrase(chunk, phrase);
}

bool within_length(const Span& prediction, const Span& gold) noexcept {
    return prediction.length_words() <= gold.length_words() + kLengthSlackWords;
}

namespace {

bool is_claimed(const std::vector<bool>& claimed, std::size_t i) { return i < claimed.size() && claimed[i]; }

std::size_t overlap_words(const Span& a, const Span& b) {
    const auto lo = std::max(a.start, b.start);
    const auto hi = std::min(a.end, b.end);
    return hi >= lo ? hi - lo + 1 : 0;
}

} // namespace

std::optional<std::size_t> match_direct(const Span& located, std::span<const Span> golds,
                                        const std::vector<bool>& claimed) {
    std::optional<std::size_t> best;
    std::size_t best_overlap = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        if (is_claimed(claimed, i) || !within_length(located, golds[i])) continue;
        const auto ov = overlap_words(located, golds[i]);
        if (ov > best_overlap) {
            best_overlap = ov;
            best = i;
        }
    }
    return best;
}

std::optional<std::size_t> match_semantic(const Span& located, std::span<const Span> golds, Embedder& embedder,
                                          double threshold, const std::vector<bool>& claimed) {
    std::optional<std::size_t> best;
    double best_score = 0.0;
    EmbeddingVector query;
    bool embedded = false;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        if (is_claimed(claimed, i) || !within_length(located, golds[i])) continue;
        if (!embedded) {
            query = embedder.embed(located.text);
            embedded = true;
        }
        const auto g = embedder.embed(golds[i].text);
        const double score = cosine_similarity(query.values, g.values);
        if (score >= threshold && (!best || score > best_score)) {
            best = i;
            best_score = score;
        }
    }
    return best;
}

std::string_view to_string(MatchScheme scheme) {
    return scheme == MatchScheme::direct ? "direct" : "semantic";
}

namespace {

struct SampleTally {
    std::size_t tp = 0, fp = 0, fn = 0, invalid = 0, valid = 0, length = 0;
    std::vector<MatchPair> matches;
};

SampleTally score_sample(const EvalSample& s, MatchScheme scheme, Embedder* embedder, double threshold) {
    SampleTally t;
    std::vector<std::optional<Span>> located;
    for (const auto& p : s.predictions) located.push_back(locate_prediction(s.chunk, p));

    std::vector<bool> claimed(s.gold.size(), false);
    std::vector<bool> matched(located.size(), false);
    auto record = [&](std::size_t prediction, std::size_t gold) {
        claimed[gold] = true;
        matched[prediction] = true;
        t.matches.push_back({s.sample_id, prediction, gold});
    };
    for (std::size_t i = 0; i < located.size(); ++i) {
        if (!located[i]) continue;
        if (auto g = match_direct(*located[i], s.gold, claimed)) record(i, *g);
    }
    if (scheme == MatchScheme::semantic) {
        for (std::size_t i = 0; i < located.size(); ++i) {
            if (!located[i] || matched[i]) continue;
            if (auto g = match_semantic(*located[i], s.gold, *embedder, threshold, claimed)) record(i, *g);
        }
    }
    for (std::size_t i = 0; i < located.size(); ++i) {
        if (!located[i]) {
            ++t.invalid;
            continue;
        }
        ++t.valid;
        t.length += located[i]->length_words();
        matched[i] ? ++t.tp : ++t.fp;
    }
    t.fn = static_cast<std::size_t>(std::count(claimed.begin(), claimed.end(), false));
    return t;
}

} // namespace

Metrics score(std::span<const EvalSample> samples, MatchScheme scheme, Embedder* embedder, double threshold) {
    if (samples.empty()) throw InputError("score needs at least one sample");
    if (scheme == MatchScheme::semantic && !embedder) throw InputError("semantic matching needs an embedder");

    Metrics m;
    std::size_t valid = 0;
    std::size_t length = 0;
    for (const auto& s : samples) {
        SampleTally t;
        try {
            t = score_sample(s, scheme, embedder, threshold);
        } catch (const TransportError& e) {
            spdlog::warn("sample {} unscored: {}", s.sample_id, e.what());
            ++m.unscored;
            continue;
        }
        ++m.samples;
        m.tp += t.tp;
        m.fp += t.fp;
        m.fn += t.fn;
        m.invalid += t.invalid;
        valid += t.valid;
        length += t.length;
        m.matches.insert(m.matches.end(), t.matches.begin(), t.matches.end());
    }
    const auto pd = m.tp + m.fp;
    const auto rd = m.tp + m.fn;
    m.degenerate = pd == 0 || rd == 0;
    m.precision = pd ? static_cast<double>(m.tp) / static_cast<double>(pd) : 0.0;
    m.recall = rd ? static_cast<double>(m.tp) / static_cast<double>(rd) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    if (m.samples) m.mean_pred_regions = static_cast<double>(valid) / static_cast<double>(m.samples);
    if (valid) m.mean_pred_length_words = static_cast<double>(length) / static_cast<double>(valid);
    return m;
}

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
    nlohmann::ordered_json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    j["invalid"] = m.invalid;
    j["samples"] = m.samples;
    j["unscored"] = m.unscored;
    j["mean_pred_regions"] = m.mean_pred_regions;
    j["mean_pred_length_words"] = m.mean_pred_length_words;
    j["degenerate"] = m.degenerate;
    return j;
}

} // namespace

std::string format_report(const std::map<std::string, ModelReport>& reports) {
    std::size_t name_width = 5;
    for (const auto& [name, _] : reports) name_width = std::max(name_width, name.size());

    std::ostringstream out;
    auto cell = [&](const std::string& s, std::size_t w) {
        out << ' ' << s << std::string(w > s.size() ? w - s.size() : 0, ' ') << " |";
    };
    const std::vector<std::pair<std::string, std::size_t>> header = {
        {"DM Precision", 12}, {"DM Recall", 9},  {"DM F1", 5},   {"SM Precision", 12},
        {"SM Recall", 9},     {"SM F1", 5},      {"Regions", 7}, {"Length", 6}};
    out << '|';
    cell("Model", name_width);
    for (const auto& [h, w] : header) cell(h, w);
    out << "\n|" << std::string(name_width + 2, '-') << '|';
    for (const auto& [h, w] : header) out << std::string(w + 2, '-') << '|';
    out << '\n';

    for (const auto& [name, r] : reports) {
        out << '|';
        cell(name, name_width);
        auto triple = [&](const std::optional<Metrics>& m, std::size_t first) {
            cell(m ? fixed3(m->precision) : "-", header[first].second);
            cell(m ? fixed3(m->recall) : "-", header[first + 1].second);
            cell(m ? fixed3(m->f1) : "-", header[first + 2].second);
        };
        triple(r.direct, 0);
        triple(r.semantic, 3);
        const auto& any = r.direct ? r.direct : r.semantic;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", any ? any->mean_pred_regions : 0.0);
        cell(buf, header[6].second);
        std::snprintf(buf, sizeof buf, "%.2f", any ? any->mean_pred_length_words : 0.0);
        cell(buf, header[7].second);
        out << '\n';
    }
    return out.str();
}

nlohmann::ordered_json report_json(const std::map<std::string, ModelReport>& reports) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& [name, r] : reports) {
        nlohmann::ordered_json row;
        row["model"] = name;
        row["direct"] = r.direct ? metrics_json(*r.direct) : nlohmann::ordered_json(nullptr);
        row["semantic"] = r.semantic ? metrics_json(*r.semantic) : nlohmann::ordered_json(nullptr);
        rows.push_back(std::move(row));
    }
    nlohmann::ordered_json out;
    out["models"] = std::move(rows);
    return out;
}

} // namespace gcoach
