#include "gcoach/embedding.hpp"
#include "gcoach/errors.hpp"
#include "gcoach/hashing.hpp"
#include "gcoach/text_metrics.hpp"

#include "../support/doubles.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>
#include <set>

using namespace gcoach;

TEST_SUITE("embedding") {

TEST_CASE("fnv1a matches hand-computed trigram hashes") {
    CHECK(fnv1a_32("") == 2166136261u);
    CHECK(fnv1a_32("^ab") == 901984230u);
    CHECK(fnv1a_32("abc") == 440920331u);
    CHECK(fnv1a_32("bc$") == 3032243170u);
    for (std::string s : {"^ab", "abc", "bc$", "rising", "中文"}) CHECK(fnv1a_32(s) == oracle::fnv1a(s));
}

TEST_CASE("stub embedding of abc touches exactly its trigram buckets") {
    const auto v = stub_embed("abc");
    CHECK(v.dims() == 256);
    CHECK_FALSE(v.degenerate);
    const std::set<std::size_t> expected{230, 11, 226};
    for (std::size_t i = 0; i < 256; ++i) {
        if (expected.count(i)) {
            CHECK(v.values[i] == doctest::Approx(1.0 / std::sqrt(3.0)));
        } else {
            CHECK(v.values[i] == 0.0);
        }
    }
    CHECK(v.values == oracle::stub_embed("abc"));
}

TEST_CASE("stub embedding agrees with the oracle") {
    for (std::string s : {"rising prices", "there's nothing", "a", "über straße", "one key reason why"})
        CHECK(stub_embed(s).values == oracle::stub_embed(normalize_phrase(s)));
    CHECK(stub_embed("Rising PRICES!").values == stub_embed("rising prices").values);
}

TEST_CASE("stub embedding determinism and discrimination") {
    StubEmbedder stub;
    CHECK(stub.embed("rising prices").values == stub.embed("rising prices").values);
    CHECK(stub.embed("a").values != stub.embed("b").values);
    CHECK(oracle::cosine(oracle::stub_embed("a"), oracle::stub_embed("b")) < 1.0);
    const auto base = stub_embed("rising prices");
    const double near = cosine_similarity(base.view(), stub_embed("rising price").view());
    const double far = cosine_similarity(base.view(), stub_embed("quantum foam").view());
    CHECK(near > far);
    CHECK(near == doctest::Approx(oracle::cosine(oracle::stub_embed("rising prices"), oracle::stub_embed("rising price"))));
    CHECK(cosine_similarity(base.view(), base.view()) == doctest::Approx(1.0));
}

TEST_CASE("empty text") {
    const auto v = stub_embed("  ...  ");
    CHECK(v.degenerate);
    CHECK(v.values == std::vector<double>(256, 0.0));
    StubEmbedder stub;
    CHECK_THROWS_AS(stub.embed(""), InputError);
    CHECK_THROWS_AS(stub.embed_many({"ok", "--"}), InputError);
}

TEST_CASE("cache issues at most one provider request per text") {
    auto inner = std::make_shared<testing::CountingEmbedder>();
    CachingEmbedder cache(inner);
    const auto a = cache.embed("rising prices");
    const auto b = cache.embed("rising prices");
    CHECK(a.values == b.values);
    CHECK(inner->requests == 1);
    cache.embed_many({"one", "two", "one", "rising prices"});
    CHECK(inner->requests == 2);
    CHECK(inner->texts == 3);
    CHECK(cache.provider_requests() == 2);
}

TEST_CASE("cache sidecar survives restarts") {
    testing::TempDir dir;
    const auto sidecar = dir / "cache.jsonl";
    {
        auto inner = std::make_shared<testing::CountingEmbedder>();
        CachingEmbedder cache(inner, sidecar);
        cache.embed_many({"alpha beta", "gamma"});
        CHECK(inner->requests == 1);
    }
    auto inner = std::make_shared<testing::CountingEmbedder>();
    CachingEmbedder cache(inner, sidecar);
    CHECK(cache.cached() == 2);
    CHECK(cache.embed("gamma").values == stub_embed("gamma").values);
    CHECK(inner->requests == 0);
    const auto line = testing::read_text(sidecar).substr(0, testing::read_text(sidecar).find('\n'));
    const auto record = nlohmann::json::parse(line);
    CHECK(record.at("hash").get<std::string>() == sha256_hex("alpha beta"));
    CHECK(record.at("model") == "trigram-fnv1a-256");
}

TEST_CASE("embedding failures are transport errors") {
    CachingEmbedder cache(std::make_shared<testing::FailingEmbedder>());
    CHECK_THROWS_AS(cache.embed("anything"), TransportError);
    CHECK_THROWS_AS(make_embedder("carrier-pigeon"), InputError);
}

TEST_CASE("knn examples") {
    VectorIndex index;
    index.add("e1", {1, 0});
    index.add("e2", {0, 1});
    index.add("e3", {0.9, 0.436});
    const auto r = index.knn(std::vector<double>{1, 0}, 3);
    REQUIRE(r.size() == 3);
    CHECK(r[0].entry_id == "e1");
    CHECK(r[0].score == doctest::Approx(1.0));
    CHECK(r[1].entry_id == "e3");
    CHECK(r[1].score == doctest::Approx(0.9 / std::hypot(0.9, 0.436)));
    CHECK(r[2].entry_id == "e2");
    CHECK(r[2].score == doctest::Approx(0.0));

    const auto one = index.knn(std::vector<double>{0, 1}, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].entry_id == "e2");
    CHECK(index.knn(std::vector<double>{1, 1}, 10).size() == 3);
}

TEST_CASE("knn ties go to the lower entry id") {
    VectorIndex index;
    index.add("zeta", {0.5, 0.5});
    index.add("alpha", {0.5, 0.5});
    index.add("mid", {1, 0});
    const auto r = index.knn(std::vector<double>{1, 1}, 2);
    CHECK(r[0].entry_id == "alpha");
    CHECK(r[1].entry_id == "zeta");
}

TEST_CASE("knn errors") {
    VectorIndex index;
    CHECK_THROWS_AS(index.knn(std::vector<double>{1, 0}, 1), InputError);
    index.add("a", {1, 0});
    CHECK_THROWS_AS(index.add("a", {0, 1}), InputError);
    CHECK_THROWS_AS(index.add("b", {0, 1, 0}), InputError);
    CHECK_THROWS_AS(index.add("c", {0, 0}), InputError);
    CHECK_THROWS_AS(index.add("d", {std::nan(""), 1}), InputError);
    CHECK_THROWS_AS(index.knn(std::vector<double>{1, 0, 0}, 1), InputError);
    CHECK_THROWS_AS(index.knn(std::vector<double>{1, 0}, 0), InputError);
}

TEST_CASE("full knn is the sorted permutation of every entry") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> coarse(-2, 2); // coarse values force score ties
    VectorIndex index;
    std::vector<std::pair<std::string, std::vector<double>>> entries;
    while (entries.size() < 60) {
        std::vector<double> v(4);
        for (auto& x : v) x = coarse(rng);
        if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; })) continue;
        const auto id = "n" + std::to_string(rng() % 100000);
        if (index.find(id)) continue;
        index.add(id, v);
        entries.emplace_back(id, v);
    }
    const std::vector<double> q{1, -1, 2, 0};
    const auto got = index.knn(q, entries.size());
    const auto want = oracle::knn(entries, q, entries.size());
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].entry_id == want[i].first);
        CHECK(got[i].score == want[i].second);
    }
}

} // TEST_SUITE
