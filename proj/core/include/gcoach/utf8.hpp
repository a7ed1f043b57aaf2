#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace gcoach::utf8 {

// Decodes to Unicode scalar values. Malformed sequences decode to U+FFFD,
// one per offending byte.
std::u32string decode(std::string_view bytes);

void append(std::string& out, char32_t cp);

// Byte offset of the first malformed sequence, if any.
std::optional<std::size_t> first_invalid(std::string_view bytes);

// Length in bytes of the sequence starting at bytes[pos] (1 for malformed).
std::size_t sequence_length(std::string_view bytes, std::size_t pos);

} // namespace gcoach::utf8
