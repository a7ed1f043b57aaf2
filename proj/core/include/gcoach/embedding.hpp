#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gcoach {

struct EmbeddingVector {
    std::vector<double> values;
    std::string provider;
    std::string model;
    bool degenerate = false; // all-zero vector from text with no content

    std::size_t dims() const noexcept { return values.size(); }
    std::span<const double> view() const noexcept { return values; }
};

inline constexpr std::size_t kStubDimensions = 256;

// Character-trigram hashing embedder. The normalized text is padded with
// '^' and '$'; each trigram bumps bucket fnv1a_32(trigram) % 256 and the
// counts are L2-normalized.
EmbeddingVector stub_embed(std::string_view text);

class Embedder {
public:
    virtual ~Embedder() = default;

    virtual std::string id() const = 0;
    virtual std::string model() const = 0;

    // Throws InputError when text has no content after normalization.
    EmbeddingVector embed(std::string_view text);
    std::vector<EmbeddingVector> embed_many(const std::vector<std::string>& texts);

protected:
    virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) = 0;
};

class StubEmbedder final : public Embedder {
public:
    std::string id() const override { return "stub"; }
    std::string model() const override { return "trigram-fnv1a-256"; }

protected:
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;
};

struct HttpProviderOptions {
    std::string model; // expected model tag; empty accepts whatever the server reports
    std::chrono::milliseconds timeout{10000};
    int max_retries = 2;
};

// POST {"texts": [...]} -> {"vectors": [[...]...], "model": "..."}
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(std::string endpoint, HttpProviderOptions options);

    std::string id() const override { return endpoint_; }
    std::string model() const override { return options_.model; }

protected:
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;

private:
    std::string endpoint_;
    HttpProviderOptions options_;
};

// Memoizes an inner embedder by exact text. Optionally persists vectors to a
// line-delimited sidecar file keyed by the SHA-256 of the text.
class CachingEmbedder final : public Embedder {
public:
    explicit CachingEmbedder(std::shared_ptr<Embedder> inner,
                             std::filesystem::path sidecar = {});

    std::string id() const override { return inner_->id(); }
    std::string model() const override { return inner_->model(); }

    std::size_t provider_requests() const noexcept { return requests_.load(); }
    std::size_t cached() const;

protected:
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;

private:
    void load_sidecar();

    std::shared_ptr<Embedder> inner_;
    std::filesystem::path sidecar_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> by_hash_;
    std::atomic<std::size_t> requests_{0};
};

// "stub" or an http(s):// endpoint.
std::shared_ptr<Embedder> make_embedder(std::string_view provider_id,
                                        const HttpProviderOptions& options = {});

struct Neighbor {
    std::string entry_id;
    double score = 0.0;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Exact cosine nearest-neighbour index.
class VectorIndex {
public:
    struct Entry {
        std::string entry_id;
        std::vector<double> values;
    };

    VectorIndex() = default;
    explicit VectorIndex(std::size_t dimension) : dimension_(dimension) {}

    // Throws InputError on duplicate id, dimension mismatch, non-finite or
    // zero vectors. The first insert fixes the dimension if none was given.
    void add(std::string entry_id, std::vector<double> values);

    // Top-k by cosine descending, ties by ascending entry_id. k larger than
    // the index returns every entry.
    std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const Entry* find(std::string_view entry_id) const;

private:
    std::size_t dimension_ = 0;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

} // namespace gcoach
