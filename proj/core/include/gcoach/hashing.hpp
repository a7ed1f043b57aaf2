#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace gcoach {

std::uint32_t fnv1a_32(std::string_view bytes) noexcept;

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

// Stable identifier: prefix followed by the first 12 hex digits of the
// SHA-256 of the parts joined with '\x1f'.
std::string content_id(std::string_view prefix, std::initializer_list<std::string_view> parts);

} // namespace gcoach
