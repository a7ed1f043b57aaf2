#include "gcoach/errors.hpp"
#include "gcoach/eval.hpp"

#include "../support/doubles.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace gcoach;

namespace {

AnnotatedSample gold(const std::string& id, const std::string& text, std::vector<std::string> regions) {
    return AnnotatedSample{id, text, std::move(regions), SampleOrigin::human, true};
}

Chunk words_chunk(std::size_t n) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "w" + std::to_string(i) + " ";
    return testing::single_chunk(text);
}

std::vector<EvalSample> fixture_samples() {
    const auto golds = load_samples(testing::fixture("eval_gold.jsonl"));
    return {make_eval_sample(golds.at(0), {"the other hand", "we know that", "purple elephant"})};
}

std::size_t count_rows(const std::string& table) {
    return static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n'));
}

} // namespace

TEST_SUITE("eval") {

TEST_CASE("golds are placed at their earliest non-overlapping occurrence") {
    const auto s = make_eval_sample(gold("x", "on the other hand, on the other hand again", {"on the other hand", "the other"}),
                                    {});
    REQUIRE(s.gold.size() == 2);
    CHECK(s.gold[0].start == 0);
    CHECK(s.gold[1].start == 5);
    CHECK_THROWS_AS(make_eval_sample(gold("y", "short text", {"missing phrase"}), {}), InputError);
}

TEST_CASE("direct match examples") {
    const auto chunk = testing::single_chunk("a b c d e on the other hand f g h");
    const auto g = make_span(chunk, 5, 8);
    const auto p = locate_prediction(chunk, "the other hand");
    REQUIRE(p);
    CHECK(p->start == 6);
    CHECK(match_direct(*p, std::vector<Span>{g}) == 0u);

    const auto big = words_chunk(20);
    const auto long_pred = make_span(big, 0, 14);
    CHECK_FALSE(match_direct(long_pred, std::vector<Span>{make_span(big, 5, 6)}).has_value());
    CHECK(match_direct(make_span(big, 4, 8), std::vector<Span>{make_span(big, 5, 6)}) == 0u); // 5 <= 2 + 3
    CHECK_FALSE(match_direct(make_span(big, 3, 8), std::vector<Span>{make_span(big, 5, 6)}).has_value());

    CHECK_FALSE(locate_prediction(chunk, "purple elephant").has_value());
}

TEST_CASE("direct match prefers the largest overlap, then the earliest gold") {
    const auto c = words_chunk(20);
    const std::vector<Span> golds{make_span(c, 0, 2), make_span(c, 3, 6), make_span(c, 7, 8)};
    CHECK(match_direct(make_span(c, 2, 5), golds) == 1u);
    CHECK(match_direct(make_span(c, 2, 3), golds) == 0u);
    CHECK(match_direct(make_span(c, 2, 5), golds, {false, true, false}) == 0u);
}

TEST_CASE("semantic match examples") {
    StubEmbedder stub;
    const auto chunk = testing::single_chunk("with rising prices we feel the rising price of bread every day now");
    const std::vector<Span> golds{make_span(chunk, 1, 2)};
    CHECK(match_semantic(make_span(chunk, 1, 2), golds, stub) == 0u);

    const double c = oracle::cosine(oracle::stub_embed("rising price"), oracle::stub_embed("rising prices"));
    REQUIRE(c >= 0.75); // pinned: the stub places this pair above the threshold
    CHECK(match_semantic(make_span(chunk, 6, 7), golds, stub) == 0u);

    const auto ten = make_span(chunk, 2, 11);
    CHECK_FALSE(match_semantic(ten, golds, stub, 0.01).has_value());
    CHECK_FALSE(match_semantic(make_span(chunk, 3, 4), golds, stub).has_value());
}

TEST_CASE("hand-computed fixture: one of two valid predictions matches") {
    const auto samples = fixture_samples();
    const auto m = score(samples, MatchScheme::direct);
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 3);
    CHECK(m.invalid == 1);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.25);
    CHECK(m.f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m.mean_pred_regions == 2.0);
    CHECK(m.mean_pred_length_words == 3.0);
    CHECK_FALSE(m.degenerate);
}

TEST_CASE("perfect and degenerate predictions") {
    const auto g = gold("p", "one key reason why we gesture is to emphasize meaning", {"one key reason", "emphasize meaning"});
    const std::vector<EvalSample> perfect{make_eval_sample(g, {"one key reason", "emphasize meaning"})};
    const auto m = score(perfect, MatchScheme::direct);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);

    const std::vector<EvalSample> lost{make_eval_sample(g, {"purple elephant", "green cow", "blue dog"})};
    const auto d = score(lost, MatchScheme::direct);
    CHECK(d.tp == 0);
    CHECK(d.fp == 0);
    CHECK(d.invalid == 3);
    CHECK(d.precision == 0.0);
    CHECK(d.f1 == 0.0);
    CHECK(d.degenerate);
    CHECK_THROWS_AS(score(std::vector<EvalSample>{}, MatchScheme::direct), InputError);
    CHECK_THROWS_AS(score(perfect, MatchScheme::semantic), InputError);
}

TEST_CASE("each gold is claimed once, first prediction first") {
    const auto g = gold("c", "on the other hand we wait", {"on the other hand"});
    const std::vector<EvalSample> s{make_eval_sample(g, {"the other hand", "on the other hand"})};
    const auto m = score(s, MatchScheme::direct);
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    REQUIRE(m.matches.size() == 1);
    CHECK(m.matches[0].prediction == 0);
}

TEST_CASE("embedding failures leave samples unscored") {
    const auto samples = fixture_samples();
    testing::FailingEmbedder down;
    const auto m = score(samples, MatchScheme::semantic, &down);
    // The verbatim pass needs no embedding, but the semantic pass does.
    CHECK(m.unscored == 1);
    CHECK(m.samples == 0);
}

TEST_CASE("count invariants and direct matches within semantic matches") {
    std::mt19937 rng(17);
    StubEmbedder stub;
    const std::vector<std::string> vocab{"rising", "prices", "hurt", "small",  "steps", "help", "on",  "the",
                                         "other",  "hand",   "we",   "know",   "that",  "move", "far", "away"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> words;
        for (int i = 0; i < 30; ++i) words.push_back(vocab[rng() % vocab.size()]);
        std::string text = oracle::join(words, 0, words.size());
        std::vector<std::string> golds;
        std::size_t pos = 0;
        while (pos + 2 < words.size() && golds.size() < 4) {
            const std::size_t len = 1 + rng() % 3;
            golds.push_back(oracle::join(words, pos, len));
            pos += len + 1 + rng() % 5;
        }
        std::vector<std::string> preds;
        for (int k = 0; k < 5; ++k) {
            if (rng() % 5 == 0) {
                preds.push_back("zebra crossing");
                continue;
            }
            const std::size_t start = rng() % 25;
            preds.push_back(oracle::join(words, start, 1 + rng() % 6));
        }
        std::vector<EvalSample> samples;
        try {
            samples.push_back(make_eval_sample(gold("r" + std::to_string(trial), text, golds), preds));
        } catch (const InputError&) {
            continue; // a repeated gold phrase could not be placed without overlap
        }
        const auto dm = score(samples, MatchScheme::direct);
        const auto sm = score(samples, MatchScheme::semantic, &stub);
        for (const auto* m : {&dm, &sm}) {
            CHECK(m->tp + m->fn == samples[0].gold.size());
            CHECK(m->tp + m->fp + m->invalid == preds.size());
            CHECK(m->tp <= std::min(m->tp + m->fp, samples[0].gold.size()));
            std::set<std::size_t> golds_seen, preds_seen;
            for (const auto& p : m->matches) {
                CHECK(golds_seen.insert(p.gold).second);
                CHECK(preds_seen.insert(p.prediction).second);
            }
        }
        const std::set<MatchPair> sm_pairs(sm.matches.begin(), sm.matches.end());
        for (const auto& p : dm.matches) CHECK(sm_pairs.count(p) == 1);
    }
}

TEST_CASE("report layout") {
    const auto samples = fixture_samples();
    StubEmbedder stub;
    std::map<std::string, ModelReport> one{
        {"model-a", {score(samples, MatchScheme::direct), score(samples, MatchScheme::semantic, &stub)}}};
    const auto table = format_report(one);
    CHECK(count_rows(table) == 3);
    const auto row = table.substr(table.rfind("| model-a"));
    CHECK(std::count(row.begin(), row.end(), '|') == 10); // name + 8 numeric cells
    CHECK(row.find("0.500") != std::string::npos);
    CHECK(row.find("0.333") != std::string::npos);

    CHECK(count_rows(format_report({})) == 2);

    std::map<std::string, ModelReport> two{{"zeta", {score(samples, MatchScheme::direct), std::nullopt}},
                                           {"alpha", {score(samples, MatchScheme::direct), std::nullopt}}};
    const auto t2 = format_report(two);
    CHECK(t2.find("alpha") < t2.find("zeta"));
    CHECK(t2.find(" - ") != std::string::npos);

    const auto j = report_json(one);
    CHECK(j["models"][0]["model"] == "model-a");
    CHECK(j["models"][0]["direct"]["tp"] == 1);
}

} // TEST_SUITE
