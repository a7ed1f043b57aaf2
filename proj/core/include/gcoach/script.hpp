#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

struct Token {
    std::string surface;
    std::string norm; // lowercased, edge punctuation stripped, never empty
    std::size_t word_index = 0;
    std::size_t char_start = 0; // byte offsets into the owning chunk's raw_text
    std::size_t char_end = 0;
};

struct Chunk {
    std::string chunk_id;
    std::string slide_id;
    std::string raw_text;
    std::vector<Token> tokens;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
    std::vector<std::string> norms() const;
};

// Word-indexed, inclusive on both ends.
struct Span {
    std::string chunk_id;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;

    std::size_t length_words() const noexcept { return end - start + 1; }
    bool overlaps(const Span& other) const noexcept {
        return chunk_id == other.chunk_id && start <= other.end && other.start <= end;
    }
    friend bool operator==(const Span&, const Span&) = default;
};

struct Slide {
    std::string slide_id;
    std::string asset_ref;
    std::vector<Chunk> chunks;
};

struct Script {
    std::vector<Slide> slides;

    const Chunk* find_chunk(std::string_view chunk_id) const;
    std::size_t chunk_count() const;
};

std::vector<Token> tokenize(std::string_view raw_text);

// Normalized form of a single whitespace-free word; may be empty.
std::string normalize_word(std::string_view word);

// Norms of tokenize(text).
std::vector<std::string> normalize_words(std::string_view text);

// Space-joined norms of tokenize(text).
std::string normalize_phrase(std::string_view text);

std::string join_words(std::span<const std::string> words);

// Greedy sentence-respecting chunking. Chunk ids are "<slide_id>-c<n>", n from 1.
std::vector<Chunk> chunk_notes(std::string_view raw_text, std::size_t target_words = 100,
                               std::string_view slide_id = "slide-1");

// Throws RangeError when the bounds fall outside the chunk.
Span make_span(const Chunk& chunk, std::size_t start, std::size_t end);
std::string span_text(const Chunk& chunk, const Span& span);

// Earliest start position >= from where the chunk norms equal words.
std::optional<std::size_t> locate_words(const Chunk& chunk, std::span<const std::string> words,
                                        std::size_t from = 0);
std::optional<Span> locate_phrase(const Chunk& chunk, std::string_view phrase);

// Parses the notes import format: slides separated by a line holding only
// "---", each optionally headed by "#slide: <id>" and "#asset: <ref>".
// Throws LoadError carrying the offending line number.
Script parse_script(std::string_view document, std::size_t target_words = 100);

} // namespace gcoach
