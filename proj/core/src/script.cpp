#include "gcoach/script.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/utf8.hpp"

#include <algorithm>
#include <unordered_set>

namespace gcoach {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_edge_punct(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    switch (cp) {
    case 0x2018: case 0x2019: case 0x201C: case 0x201D: // curly quotes
    case 0x2013: case 0x2014: case 0x2026:              // dashes, ellipsis
    case 0x00AB: case 0x00BB: case 0x00BF: case 0x00A1:
        return true;
    default:
        return false;
    }
}

bool is_sentence_end(std::string_view surface) {
    auto cps = utf8::decode(surface);
    while (!cps.empty()) {
        char32_t c = cps.back();
        if (c == '"' || c == '\'' || c == ')' || c == ']' || c == 0x201D || c == 0x2019) {
            cps.pop_back();
            continue;
        }
        return c == '.' || c == '!' || c == '?' || c == 0x2026;
    }
    return false;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

} // namespace

std::vector<std::string> Chunk::norms() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.norm);
    return out;
}

const Chunk* Script::find_chunk(std::string_view chunk_id) const {
    for (const auto& slide : slides)
        for (const auto& chunk : slide.chunks)
            if (chunk.chunk_id == chunk_id) return &chunk;
    return nullptr;
}

std::size_t Script::chunk_count() const {
    std::size_t n = 0;
    for (const auto& slide : slides) n += slide.chunks.size();
    return n;
}

std::string normalize_word(std::string_view word) {
    auto cps = utf8::decode(word);
    std::size_t lo = 0;
    std::size_t hi = cps.size();
    while (lo < hi && is_edge_punct(cps[lo])) ++lo;
    while (hi > lo && is_edge_punct(cps[hi - 1])) --hi;
    std::string out;
    out.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
        char32_t c = cps[i];
        if (c >= 'A' && c <= 'Z') c = c - 'A' + 'a';
        if (c == 0x2019 || c == 0x2018) c = '\'';
        utf8::append(out, c);
    }
    return out;
}

std::vector<Token> tokenize(std::string_view raw_text) {
    std::vector<Token> tokens;
    std::size_t pos = 0;
    while (pos < raw_text.size()) {
        while (pos < raw_text.size() && is_space(raw_text[pos])) ++pos;
        if (pos >= raw_text.size()) break;
        std::size_t end = pos;
        while (end < raw_text.size() && !is_space(raw_text[end])) ++end;
        auto surface = raw_text.substr(pos, end - pos);
        auto norm = normalize_word(surface);
        if (!norm.empty()) {
            tokens.push_back(Token{std::string(surface), std::move(norm), tokens.size(), pos, end});
        }
        pos = end;
    }
    return tokens;
}

std::vector<std::string> normalize_words(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize(text)) out.push_back(std::move(t.norm));
    return out;
}

std::string join_words(std::span<const std::string> words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::string normalize_phrase(std::string_view text) {
    auto words = normalize_words(text);
    return join_words(words);
}

std::vector<Chunk> chunk_notes(std::string_view raw_text, std::size_t target_words,
                               std::string_view slide_id) {
    if (target_words == 0) throw InputError("target_words must be >= 1");
    const auto tokens = tokenize(raw_text);

    // Sentences as half-open token ranges.
    std::vector<std::pair<std::size_t, std::size_t>> sentences;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (is_sentence_end(tokens[i].surface)) {
            sentences.emplace_back(begin, i + 1);
            begin = i + 1;
        }
    }
    if (begin < tokens.size()) sentences.emplace_back(begin, tokens.size());

    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (const auto& [s, e] : sentences) {
        if (!groups.empty()) {
            auto& last = groups.back();
            if ((last.second - last.first) + (e - s) <= target_words) {
                last.second = e;
                continue;
            }
        }
        groups.emplace_back(s, e);
    }

    std::vector<Chunk> chunks;
    chunks.reserve(groups.size());
    for (const auto& [s, e] : groups) {
        Chunk chunk;
        chunk.chunk_id = std::string(slide_id) + "-c" + std::to_string(chunks.size() + 1);
        chunk.slide_id = std::string(slide_id);
        const std::size_t base = tokens[s].char_start;
        chunk.raw_text = std::string(raw_text.substr(base, tokens[e - 1].char_end - base));
        for (std::size_t i = s; i < e; ++i) {
            Token t = tokens[i];
            t.word_index = i - s;
            t.char_start -= base;
            t.char_end -= base;
            chunk.tokens.push_back(std::move(t));
        }
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

Span make_span(const Chunk& chunk, std::size_t start, std::size_t end) {
    if (start > end || end >= chunk.size()) {
        throw RangeError("span [" + std::to_string(start) + ", " + std::to_string(end) +
                         "] outside chunk '" + chunk.chunk_id + "' of " +
                         std::to_string(chunk.size()) + " words");
    }
    Span span{chunk.chunk_id, start, end, {}};
    for (std::size_t i = start; i <= end; ++i) {
        if (i > start) span.text.push_back(' ');
        span.text += chunk.tokens[i].norm;
    }
    return span;
}

std::string span_text(const Chunk& chunk, const Span& span) {
    return make_span(chunk, span.start, span.end).text;
}

std::optional<std::size_t> locate_words(const Chunk& chunk, std::span<const std::string> words,
                                        std::size_t from) {
    if (words.empty() || words.size() > chunk.size()) return std::nullopt;
    for (std::size_t p = from; p + words.size() <= chunk.size(); ++p) {
        bool hit = true;
        for (std::size_t j = 0; j < words.size(); ++j) {
            if (chunk.tokens[p + j].norm != words[j]) {
                hit = false;
                break;
            }
        }
        if (hit) return p;
    }
    return std::nullopt;
}

std::optional<Span> locate_phrase(const Chunk& chunk, std::string_view phrase) {
    const auto words = normalize_words(phrase);
    auto p = locate_words(chunk, words);
    if (!p) return std::nullopt;
    return make_span(chunk, *p, *p + words.size() - 1);
}

Script parse_script(std::string_view document, std::size_t target_words) {
    if (auto bad = utf8::first_invalid(document)) {
        const auto line = 1 + std::count(document.begin(), document.begin() + *bad, '\n');
        throw LoadError("invalid UTF-8", static_cast<std::size_t>(line));
    }

    struct Block {
        std::size_t first_line = 0;
        std::vector<std::pair<std::size_t, std::string_view>> lines;
    };
    std::vector<Block> blocks(1);
    blocks.back().first_line = 1;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= document.size()) {
        auto nl = document.find('\n', pos);
        if (nl == std::string_view::npos) nl = document.size();
        auto line = document.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (trim(line) == "---") {
            blocks.emplace_back();
            blocks.back().first_line = line_no + 1;
        } else {
            blocks.back().lines.emplace_back(line_no, line);
        }
        pos = nl + 1;
    }

    Script script;
    std::unordered_set<std::string> seen;
    std::size_t words_total = 0;
    for (const auto& block : blocks) {
        std::string slide_id;
        std::string asset_ref;
        std::string notes;
        bool header_open = true;
        bool has_content = false;
        for (const auto& [no, raw] : block.lines) {
            auto line = trim(raw);
            const bool is_slide = line.starts_with("#slide:");
            const bool is_asset = line.starts_with("#asset:");
            if (is_slide || is_asset) {
                if (!header_open) throw LoadError("directive after notes text", no);
                auto value = trim(line.substr(7));
                if (value.empty()) throw LoadError("empty directive value", no);
                if (is_slide) {
                    if (!slide_id.empty() || !asset_ref.empty())
                        throw LoadError("#slide must be the first line of a slide", no);
                    if (!seen.insert(std::string(value)).second)
                        throw LoadError("duplicate slide id '" + std::string(value) + "'", no);
                    slide_id = std::string(value);
                } else {
                    if (!asset_ref.empty()) throw LoadError("duplicate #asset directive", no);
                    asset_ref = std::string(value);
                }
                has_content = true;
                continue;
            }
            if (!line.empty()) {
                header_open = false;
                has_content = true;
            }
            if (!header_open) {
                notes.append(raw);
                notes.push_back('\n');
            }
        }
        if (!has_content) continue;
        if (slide_id.empty()) {
            slide_id = "slide-" + std::to_string(script.slides.size() + 1);
            if (!seen.insert(slide_id).second)
                throw LoadError("generated slide id '" + slide_id + "' collides", block.first_line);
        }
        Slide slide{slide_id, asset_ref, chunk_notes(notes, target_words, slide_id)};
        for (const auto& c : slide.chunks) words_total += c.size();
        script.slides.push_back(std::move(slide));
    }
    if (words_total == 0) throw LoadError("document contains no notes", line_no);
    return script;
}

} // namespace gcoach
