#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string_view>

namespace gcoach {

// Levenshtein similarity expressed as a percentage in [0, 100].
class SimilarityPercent {
public:
    constexpr SimilarityPercent() = default;
    explicit SimilarityPercent(double value);

    constexpr double value() const noexcept { return value_; }
    friend constexpr auto operator<=>(SimilarityPercent, SimilarityPercent) = default;

private:
    double value_ = 0.0;
};

// Unit-cost edit distance over Unicode scalar values.
std::size_t levenshtein_distance(std::string_view s1, std::string_view s2);

// (1 - d / (|s1| + |s2|)) * 100 with |s| counted in scalar values; two empty
// strings are identical (100).
SimilarityPercent similarity_ratio(std::string_view s1, std::string_view s2);

// Throws InputError on dimension mismatch or a zero vector.
double cosine_similarity(std::span<const double> v1, std::span<const double> v2);

} // namespace gcoach
