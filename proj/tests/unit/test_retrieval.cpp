#include "gcoach/errors.hpp"
#include "gcoach/retrieval.hpp"

#include "../support/doubles.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace gcoach;

namespace {

GestureDatabase fixture_db() {
    auto load = load_database(testing::fixture("gestures.jsonl"));
    StubEmbedder stub;
    precompute_embeddings(load.db, stub);
    return std::move(load.db);
}

GestureDatabase db_of(const std::vector<std::pair<std::string, std::string>>& entries) {
    std::vector<GestureEntry> list;
    for (const auto& [id, text] : entries) list.push_back({id, text, "t", "clips/" + id + ".mp4", 1.0, std::nullopt});
    GestureDatabase db(std::move(list));
    StubEmbedder stub;
    precompute_embeddings(db, stub);
    return db;
}

GestureRegion region(const Chunk& chunk, std::size_t start, std::size_t end) {
    GestureRegion r;
    r.span = make_span(chunk, start, end);
    r.region_id = region_id_for(r.span);
    return r;
}

} // namespace

TEST_SUITE("retrieval") {

TEST_CASE("selection prompt reproduces the reference example") {
    const auto db = db_of({{"a", "there's nothing"}, {"b", "no matter,"}, {"c", "the only thing"}});
    const std::string text =
        "First of all, thank you for your attention. There's nothing quite like being in a room full of people like "
        "this, where all of you are giving your attention to me. It's a powerful feeling, to get attention. I'm an "
        "actor, so I'm a bit of an expert on, well, nothing, really. But I do know what it feels like to get "
        "attention -- I've been lucky in my life to get a lot more than my fair share of attention.";
    const std::vector<GestureCandidate> cands{{"a", 0.9, 1}, {"b", 0.5, 2}, {"c", 0.4, 3}};
    CHECK(build_selection_prompt(text, "nothing", cands, db) == "You are an expert in public speaking. You are given a TEXT and a QUERY phrase within the text that needs to be emphasized. Additionally, you are provided with CANDIDATE emphasis areas\" Your task is to identify the CANDIDATE emphasis phrase that is most similar to the QUERY phrase in the TEXT in terms of emphasis context. Always choose only from the provided list of CANDIDATES. TEXT: First of all, thank you for your attention. There's nothing quite like being in a room full of people like this, where all of you are giving your attention to me. It's a powerful feeling, to get attention. I'm an actor, so I'm a bit of an expert on, well, nothing, really. But I do know what it feels like to get attention -- I've been lucky in my life to get a lot more than my fair share of attention.; QUERY: nothing; CANDIDATES: 1) there's nothing 2) no matter, 3) the only thing. Give only the candidate as output.");
}

TEST_CASE("selection prompt lists exactly the given candidates") {
    const auto db = db_of({{"a", "left (and right)"}, {"b", "up"}});
    const std::vector<GestureCandidate> cands{{"a", 0.9, 1}, {"b", 0.5, 2}};
    const auto p = build_selection_prompt("Some text.", "left", cands, db);
    CHECK(p.ends_with("CANDIDATES: 1) left (and right) 2) up. Give only the candidate as output."));
    CHECK(p.find(" 3) ") == std::string::npos);
    CHECK(p.starts_with(kSelectionSystemPrompt));
    CHECK_THROWS_AS(build_selection_prompt("t", "q", {}, db), InputError);
}

TEST_CASE("retrieval ranks by cosine with self-retrieval first") {
    const auto db = fixture_db();
    StubEmbedder stub;
    const auto c = retrieve_candidates("one key reason", db, stub, 3);
    REQUIRE(c.size() == 3);
    CHECK(c[0].entry_id == "g01");
    CHECK(c[0].similarity == doctest::Approx(1.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i].rank == i + 1);
        if (i) CHECK(c[i - 1].similarity >= c[i].similarity);
    }
    CHECK(retrieve_candidates("far", db_of({{"a", "far away"}, {"b", "near"}}), stub, 3).size() == 2);
    CHECK_THROWS_AS(retrieve_candidates("  ", db, stub, 3), InputError);
    CHECK_THROWS_AS(retrieve_candidates("x", GestureDatabase{}, stub, 3), InputError);
}

TEST_CASE("retrieval equals the exhaustive scan") {
    const auto db = fixture_db();
    StubEmbedder stub;
    std::vector<std::pair<std::string, std::vector<double>>> all;
    for (const auto& e : db.entries()) all.emplace_back(e.entry_id, oracle::stub_embed(e.region_text));
    for (std::string q : {"rising prices", "there is nothing", "the wave", "a big round circle", "zzz"}) {
        const auto got = retrieve_candidates(q, db, stub, 3);
        const auto want = oracle::knn(all, oracle::stub_embed(q), 3);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].entry_id == want[i].first);
            CHECK(got[i].similarity == doctest::Approx(want[i].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("parse selection answers") {
    const std::vector<std::string> texts{"there's nothing", "no matter", "the only thing"};
    CHECK(parse_selection("1) there's nothing", texts) == 1u);
    CHECK(parse_selection("2.", texts) == 2u);
    CHECK(parse_selection("3", texts) == 3u);
    CHECK(parse_selection("No matter", texts) == 2u);
    CHECK(parse_selection("I would pick 'the only thing' here", texts) == 3u);
    CHECK(parse_selection("the best choice is option 3", texts) == 3u);
    CHECK_FALSE(parse_selection("none of these fit", texts).has_value());
    CHECK_FALSE(parse_selection("option 7", texts).has_value());
    CHECK_FALSE(parse_selection("", texts).has_value());
}

TEST_CASE("selection sources and fallback") {
    const auto db = db_of({{"a", "there's nothing"}, {"b", "no matter"}, {"c", "the only thing"}});
    const auto chunk = testing::single_chunk("There's nothing quite like it.");
    const auto r = region(chunk, 0, 1);
    const std::vector<GestureCandidate> cands{{"a", 0.9, 1}, {"b", 0.5, 2}, {"c", 0.4, 3}};

    auto s1 = select_gesture(r, cands, chunk.raw_text, *testing::constant_provider("1) there's nothing"), db);
    CHECK(s1.recommendation.selected_rank == 1);
    CHECK(s1.recommendation.selection_source == SelectionSource::llm);
    CHECK_FALSE(s1.warning);

    auto s3 = select_gesture(r, cands, chunk.raw_text, *testing::constant_provider("the best choice is option 3"), db);
    CHECK(s3.recommendation.selected_rank == 3);
    CHECK(s3.recommendation.selection_source == SelectionSource::llm);

    auto none = select_gesture(r, cands, chunk.raw_text, *testing::constant_provider("none of these fit"), db);
    CHECK(none.recommendation.selected_rank == 1);
    CHECK(none.recommendation.selection_source == SelectionSource::fallback_rank1);
    CHECK(none.warning);

    auto down = select_gesture(r, cands, chunk.raw_text, *testing::unreachable_provider(), db);
    CHECK(down.recommendation.selected_rank == 1);
    CHECK(down.recommendation.selection_source == SelectionSource::fallback_rank1);
    CHECK(down.warning);
    CHECK(down.recommendation.selected().entry_id == "a");
}

TEST_CASE("recommend a chunk in region order") {
    const auto db = fixture_db();
    StubEmbedder stub;
    const auto chunk = testing::single_chunk("One key reason why prices are rising is that everything changes fast.");
    std::vector<GestureRegion> regions{region(chunk, 0, 2), region(chunk, 4, 6), region(chunk, 9, 10)};
    regions[1].status = RegionStatus::deleted;

    auto always2 = testing::constant_provider("2");
    const auto out = recommend_chunk(chunk, regions, db, stub, *always2, 3);
    REQUIRE(out.recommendations.size() == 2);
    CHECK(out.recommendations[0].region_id == regions[0].region_id);
    CHECK(out.recommendations[1].region_id == regions[2].region_id);
    for (const auto& rec : out.recommendations) {
        CHECK(rec.selected_rank == 2);
        CHECK(rec.selection_source == SelectionSource::llm);
        CHECK(db.find(rec.selected().entry_id) != nullptr);
        CHECK(rec.candidates.size() == 3);
    }
    CHECK(always2->prompts.size() == 2);
    CHECK(recommend_chunk(chunk, {}, db, stub, *always2, 3).recommendations.empty());
    CHECK_THROWS_AS(recommend_chunk(chunk, regions, GestureDatabase{}, stub, *always2, 3), InputError);
}

TEST_CASE("recommendation is reproducible") {
    const auto db = fixture_db();
    StubEmbedder stub;
    const auto chunk = testing::single_chunk("Imagine a huge wave rising over the city right here.");
    const std::vector<GestureRegion> regions{region(chunk, 2, 3), region(chunk, 8, 9)};
    auto provider = MockCompletionProvider::from_file(testing::fixture("selection.jsonl"));
    const auto a = recommend_chunk(chunk, regions, db, stub, *provider, 3);
    const auto b = recommend_chunk(chunk, regions, db, stub, *provider, 3);
    CHECK(a.recommendations == b.recommendations);
    CHECK(a.recommendations[0].selection_source == SelectionSource::fallback_rank1);
}

} // TEST_SUITE
