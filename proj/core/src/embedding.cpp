#include "gcoach/embedding.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/hashing.hpp"
#include "gcoach/script.hpp"
#include "gcoach/text_metrics.hpp"
#include "gcoach/utf8.hpp"
#include "http_client.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gcoach {

EmbeddingVector stub_embed(std::string_view text) {
    EmbeddingVector out;
    out.values.assign(kStubDimensions, 0.0);
    out.provider = "stub";
    out.model = "trigram-fnv1a-256";

    const auto norm = normalize_phrase(text);
    if (norm.empty()) {
        out.degenerate = true;
        return out;
    }
    std::u32string padded = U"^" + utf8::decode(norm) + U"$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::string trigram;
        for (std::size_t j = i; j < i + 3; ++j) utf8::append(trigram, padded[j]);
        out.values[fnv1a_32(trigram) % kStubDimensions] += 1.0;
    }
    double norm2 = 0.0;
    for (double v : out.values) norm2 += v * v;
    const double len = std::sqrt(norm2);
    for (double& v : out.values) v /= len;
    return out;
}

EmbeddingVector Embedder::embed(std::string_view text) {
    auto out = embed_many({std::string(text)});
    return std::move(out.front());
}

std::vector<EmbeddingVector> Embedder::embed_many(const std::vector<std::string>& texts) {
    for (const auto& t : texts) {
        if (normalize_phrase(t).empty()) throw InputError("cannot embed empty text");
    }
    if (texts.empty()) return {};
    auto out = do_embed(texts);
    if (out.size() != texts.size()) {
        throw TransportError(id() + ": expected " + std::to_string(texts.size()) +
                             " vectors, got " + std::to_string(out.size()));
    }
    return out;
}

std::vector<EmbeddingVector> StubEmbedder::do_embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(stub_embed(t));
    return out;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, HttpProviderOptions options)
    : endpoint_(std::move(endpoint)), options_(std::move(options)) {}

std::vector<EmbeddingVector> HttpEmbedder::do_embed(const std::vector<std::string>& texts) {
    const auto response = detail::post_json(endpoint_, nlohmann::json{{"texts", texts}},
                                            options_.timeout, options_.max_retries);
    if (!response.is_object() || !response.contains("vectors") || !response["vectors"].is_array())
        throw TransportError(endpoint_ + ": response lacks \"vectors\"");
    const std::string model = response.value("model", std::string{});
    if (!options_.model.empty() && !model.empty() && model != options_.model) {
        throw TransportError(endpoint_ + ": model mismatch, configured '" + options_.model +
                             "' but server reports '" + model + "'");
    }
    std::vector<EmbeddingVector> out;
    for (const auto& row : response["vectors"]) {
        EmbeddingVector v;
        v.provider = endpoint_;
        v.model = model.empty() ? options_.model : model;
        try {
            v.values = row.get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw TransportError(endpoint_ + ": vector is not a number array");
        }
        if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); }))
            throw TransportError(endpoint_ + ": non-finite vector component");
        v.degenerate = std::all_of(v.values.begin(), v.values.end(), [](double x) { return x == 0.0; });
        out.push_back(std::move(v));
    }
    return out;
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<Embedder> inner, std::filesystem::path sidecar)
    : inner_(std::move(inner)), sidecar_(std::move(sidecar)) {
    if (!inner_) throw InputError("CachingEmbedder needs an inner embedder");
    if (!sidecar_.empty()) load_sidecar();
}

void CachingEmbedder::load_sidecar() {
    std::ifstream in(sidecar_);
    if (!in) return;
    const auto model = inner_->model();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto rec = nlohmann::json::parse(line);
            if (rec.at("model").get<std::string>() != model) continue;
            EmbeddingVector v;
            v.values = rec.at("vector").get<std::vector<double>>();
            v.provider = inner_->id();
            v.model = model;
            v.degenerate = std::all_of(v.values.begin(), v.values.end(), [](double x) { return x == 0.0; });
            by_hash_[rec.at("hash").get<std::string>()] = std::move(v);
        } catch (const nlohmann::json::exception& e) {
            // A torn final line from an interrupted write is tolerated.
            spdlog::warn("{}:{}: skipping unreadable cache record: {}", sidecar_.string(), line_no, e.what());
        }
    }
}

std::size_t CachingEmbedder::cached() const {
    std::shared_lock lock(mutex_);
    return by_hash_.size();
}

std::vector<EmbeddingVector> CachingEmbedder::do_embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> hashes;
    hashes.reserve(texts.size());
    for (const auto& t : texts) hashes.push_back(sha256_hex(t));

    std::vector<std::size_t> missing;
    {
        std::shared_lock lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = by_hash_.find(hashes[i]);
            if (it != by_hash_.end()) {
                out[i] = it->second;
            } else {
                missing.push_back(i);
            }
        }
    }
    if (missing.empty()) return out;

    // Deduplicate within the batch so one request covers repeated texts.
    std::vector<std::string> request;
    std::vector<std::string> request_hashes;
    std::unordered_map<std::string, std::size_t> slot;
    for (auto i : missing) {
        if (slot.emplace(hashes[i], request.size()).second) {
            request.push_back(texts[i]);
            request_hashes.push_back(hashes[i]);
        }
    }
    ++requests_;
    auto fresh = inner_->embed_many(request);

    std::unique_lock lock(mutex_);
    std::ofstream sidecar;
    if (!sidecar_.empty()) sidecar.open(sidecar_, std::ios::app);
    for (std::size_t r = 0; r < request.size(); ++r) {
        const auto& hash = request_hashes[r];
        auto [it, inserted] = by_hash_.emplace(hash, fresh[r]);
        if (inserted && sidecar) {
            nlohmann::json rec{{"hash", hash}, {"model", inner_->model()}, {"vector", fresh[r].values}};
            sidecar << rec.dump() << '\n';
        }
    }
    if (sidecar) sidecar.flush();
    for (auto i : missing) out[i] = by_hash_.at(hashes[i]);
    return out;
}

std::shared_ptr<Embedder> make_embedder(std::string_view provider_id, const HttpProviderOptions& options) {
    if (provider_id == "stub") return std::make_shared<StubEmbedder>();
    if (provider_id.starts_with("http://") || provider_id.starts_with("https://"))
        return std::make_shared<HttpEmbedder>(std::string(provider_id), options);
    throw InputError("unknown embedding provider '" + std::string(provider_id) + "'");
}

void VectorIndex::add(std::string entry_id, std::vector<double> values) {
    if (by_id_.count(entry_id)) throw InputError("duplicate index entry '" + entry_id + "'");
    if (values.empty()) throw InputError("empty vector for '" + entry_id + "'");
    if (dimension_ == 0) dimension_ = values.size();
    if (values.size() != dimension_) {
        throw InputError("dimension mismatch for '" + entry_id + "': " + std::to_string(values.size()) +
                         " vs index " + std::to_string(dimension_));
    }
    bool nonzero = false;
    for (double v : values) {
        if (!std::isfinite(v)) throw InputError("non-finite component in '" + entry_id + "'");
        nonzero = nonzero || v != 0.0;
    }
    if (!nonzero) throw InputError("zero vector for '" + entry_id + "'");
    by_id_.emplace(entry_id, entries_.size());
    entries_.push_back(Entry{std::move(entry_id), std::move(values)});
}

const VectorIndex::Entry* VectorIndex::find(std::string_view entry_id) const {
    auto it = by_id_.find(std::string(entry_id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::vector<Neighbor> VectorIndex::knn(std::span<const double> query, std::size_t k) const {
    if (k == 0) throw InputError("knn: k must be >= 1");
    if (entries_.empty()) throw InputError("knn: index is empty");
    if (query.size() != dimension_) {
        throw InputError("knn: query dimension " + std::to_string(query.size()) + " vs index " +
                         std::to_string(dimension_));
    }
    std::vector<Neighbor> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) scored.push_back({e.entry_id, cosine_similarity(e.values, query)});
    const auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry_id < b.entry_id;
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    scored.resize(take);
    return scored;
}

} // namespace gcoach
