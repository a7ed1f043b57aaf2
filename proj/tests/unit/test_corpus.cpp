#include "gcoach/corpus.hpp"
#include "gcoach/errors.hpp"

#include "../support/doubles.hpp"
#include "../support/fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace gcoach;

namespace {

std::string record(const std::string& id, const std::string& text, double duration = 1.5,
                   const std::string& kind = "\"iconic\"") {
    return R"({"entry_id": ")" + id + R"(", "region_text": ")" + text + R"(", "talk_id": "t", "clip_uri": "clips/)" + id +
           R"(.mp4", "duration_s": )" + std::to_string(duration) + R"(, "gesture_kind": )" + kind + "}\n";
}

DatabaseLoad parse(const std::string& text) {
    std::istringstream in(text);
    return parse_database(in);
}

} // namespace

TEST_SUITE("corpus") {

TEST_CASE("fixture database loads cleanly") {
    const auto load = load_database(testing::fixture("gestures.jsonl"));
    CHECK(load.db.entries().size() == 20);
    CHECK(load.errors.empty());
    CHECK(load.warnings.empty());
    CHECK(load.db.find("g03")->region_text == "rising prices");
    CHECK(load.db.find_by_clip("clips/g03.mp4")->entry_id == "g03");
    CHECK_FALSE(load.db.indexed());
}

TEST_CASE("hard violations reject entries, soft ones warn") {
    const auto load = parse(record("a", "fine") + record("zero", "no time", 0.0) + record("long", "too long", 12.0) +
                            record("kind", "odd kind", 1.0, "\"beat\"") + record("a", "duplicate id") +
                            record("empty", "  ") +
                            record("wordy", "one two three four five six seven eight nine ten eleven twelve thirteen "
                                            "fourteen fifteen sixteen seventeen eighteen") +
                            record("null", "no label", 2.0, "null"));
    std::vector<std::string> rejected;
    for (const auto& e : load.errors) rejected.push_back(e.entry_id);
    CHECK(rejected == std::vector<std::string>{"zero", "long", "kind", "a", "empty"});
    CHECK(load.errors[0].line == 2);
    REQUIRE(load.warnings.size() == 1);
    CHECK(load.warnings[0].entry_id == "wordy");
    CHECK(load.db.entries().size() == 3);
    CHECK_FALSE(load.db.find("null")->gesture_kind.has_value());
}

TEST_CASE("malformed records are load errors with a line number") {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse(text);
        } catch (const LoadError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of(record("a", "ok") + "{not json\n") == 2);
    CHECK(line_of(record("a", "ok") + "\n" + R"({"entry_id": "b", "region_text": 5})" + "\n") == 3);
    CHECK(line_of(R"({"entry_id": "b"})") == 1);
    CHECK_THROWS_AS(load_database("/nonexistent/gestures.jsonl"), Error);
}

TEST_CASE("serialize and reload round-trips") {
    const auto load = load_database(testing::fixture("gestures.jsonl"));
    std::ostringstream out;
    write_database(out, load.db);
    const auto again = parse(out.str());
    CHECK(again.db.entries() == load.db.entries());
    CHECK(testing::read_text(testing::fixture("gestures.jsonl")).size() > 0);
}

TEST_CASE("precompute builds a unit-norm index and reuses the cache") {
    auto load = load_database(testing::fixture("gestures.jsonl"));
    auto inner = std::make_shared<testing::CountingEmbedder>();
    CachingEmbedder cache(inner);
    precompute_embeddings(load.db, cache);
    CHECK(load.db.indexed());
    CHECK(load.db.manifest().entry_count == 20);
    CHECK(load.db.manifest().model == "trigram-fnv1a-256");
    for (const auto& e : load.db.index().entries()) {
        double n = 0;
        for (double x : e.values) n += x * x;
        CHECK(n == doctest::Approx(1.0));
    }
    const auto before = inner->requests.load();
    auto second = load_database(testing::fixture("gestures.jsonl"));
    precompute_embeddings(second.db, cache);
    CHECK(inner->requests == before);
}

TEST_CASE("self retrieval for unique region texts") {
    auto load = load_database(testing::fixture("gestures.jsonl"));
    StubEmbedder stub;
    precompute_embeddings(load.db, stub);
    for (const auto& e : load.db.entries()) {
        const auto q = stub.embed(e.region_text);
        const auto hit = load.db.index().knn(q.view(), 1);
        CHECK(hit.at(0).entry_id == e.entry_id);
    }
}

TEST_CASE("duplicate region texts index identical vectors") {
    auto load = parse(record("x1", "going up") + record("x2", "going up") + record("x3", "far away"));
    StubEmbedder stub;
    precompute_embeddings(load.db, stub);
    CHECK(load.db.index().find("x1")->values == load.db.index().find("x2")->values);
}

TEST_CASE("precompute is all or nothing") {
    auto load = load_database(testing::fixture("gestures.jsonl"));
    testing::FailingEmbedder down;
    CHECK_THROWS_AS(precompute_embeddings(load.db, down), TransportError);
    CHECK_FALSE(load.db.indexed());
    CHECK(load.db.index().empty());
}

TEST_CASE("sample files and verification") {
    const auto samples = load_samples(testing::fixture("samples.jsonl"));
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].origin == SampleOrigin::human);
    CHECK(regions_occur_verbatim(samples[0]));
    auto s = samples[0];
    s.regions.push_back("not in there");
    CHECK_FALSE(regions_occur_verbatim(s));
    CHECK(sample_from_json(nlohmann::json::parse(to_json(samples[0]).dump())) == samples[0]);
}

TEST_CASE("augmentation prompt asks for similar transcripts") {
    const auto samples = load_samples(testing::fixture("samples.jsonl"));
    const auto prompt = build_augmentation_prompt(samples[0], 5);
    CHECK(prompt.find("structurally and semantically similar") != std::string::npos);
    CHECK(prompt.find("adapted to different") != std::string::npos);
    CHECK(prompt.find(samples[0].text) != std::string::npos);
}

TEST_CASE("augmentation keeps valid synthetic samples") {
    const auto human = load_samples(testing::fixture("samples.jsonl")).at(0);
    std::string five;
    for (int i = 0; i < 5; ++i)
        five += R"({"text": "Variant )" + std::to_string(i) + R"( shows small steps toward change.", "regions": ["small steps"]})" + "\n";
    auto provider = testing::constant_provider(five);
    const auto r = augment_sample(human, *provider, 5);
    REQUIRE(r.samples.size() == 5);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        CHECK(r.samples[i].origin == SampleOrigin::synthetic);
        CHECK_FALSE(r.samples[i].verified);
        CHECK(r.samples[i].sample_id == "h1-aug" + std::to_string(i + 1));
    }
    CHECK(r.warnings.empty());
    CHECK(mark_verified(r.samples[0]).verified);
}

TEST_CASE("augmentation drops invalid outputs and reports a shortfall") {
    const auto human = load_samples(testing::fixture("samples.jsonl")).at(0);
    auto provider = MockCompletionProvider::from_file(testing::fixture("augment.jsonl"));
    const auto r = augment_sample(human, *provider, 5);
    CHECK(r.samples.size() == 3);
    bool shortfall = false;
    for (const auto& w : r.warnings) shortfall |= w.find("shortfall") != std::string::npos;
    CHECK(shortfall);
}

TEST_CASE("augmentation preconditions and failures") {
    auto human = load_samples(testing::fixture("samples.jsonl")).at(0);
    CHECK_THROWS_AS(augment_sample(human, *testing::constant_provider(""), 0), InputError);
    auto synthetic = human;
    synthetic.origin = SampleOrigin::synthetic;
    CHECK_THROWS_AS(augment_sample(synthetic, *testing::constant_provider(""), 5), InputError);
    CHECK_THROWS_AS(augment_sample(human, *testing::unreachable_provider(), 5), TransportError);
}

} // TEST_SUITE
