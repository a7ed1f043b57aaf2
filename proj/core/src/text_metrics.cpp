#include "gcoach/text_metrics.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/utf8.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace gcoach {

SimilarityPercent::SimilarityPercent(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 100.0)) throw RangeError("similarity outside [0, 100]");
}

namespace {

std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
    const std::u32string& shorter = a.size() < b.size() ? a : b;
    const std::u32string& longer = a.size() < b.size() ? b : a;
    std::vector<std::size_t> row(shorter.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= longer.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= shorter.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (longer[i - 1] == shorter[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[shorter.size()];
}

} // namespace

std::size_t levenshtein_distance(std::string_view s1, std::string_view s2) {
    return edit_distance(utf8::decode(s1), utf8::decode(s2));
}

SimilarityPercent similarity_ratio(std::string_view s1, std::string_view s2) {
    const auto a = utf8::decode(s1);
    const auto b = utf8::decode(s2);
    const std::size_t total = a.size() + b.size();
    if (total == 0) return SimilarityPercent(100.0);
    const double d = static_cast<double>(edit_distance(a, b));
    return SimilarityPercent((1.0 - d / static_cast<double>(total)) * 100.0);
}

double cosine_similarity(std::span<const double> v1, std::span<const double> v2) {
    if (v1.size() != v2.size()) {
        throw InputError("cosine: dimension mismatch (" + std::to_string(v1.size()) + " vs " +
                         std::to_string(v2.size()) + ")");
    }
    double dot = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    for (std::size_t i = 0; i < v1.size(); ++i) {
        dot += v1[i] * v2[i];
        n1 += v1[i] * v1[i];
        n2 += v2[i] * v2[i];
    }
    if (n1 == 0.0 || n2 == 0.0) throw InputError("cosine: zero vector");
    return std::clamp(dot / (std::sqrt(n1) * std::sqrt(n2)), -1.0, 1.0);
}

} // namespace gcoach
