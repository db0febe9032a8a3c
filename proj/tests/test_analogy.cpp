#include <sstream>

#include "json.hpp"

#include "doctest.h"
#include "scalevec/analogy.hpp"
#include "scalevec/peak.hpp"
#include "support/oracles.hpp"

using namespace scalevec;

namespace {

// Hand-built 2-D embedding in which man:woman :: king:queen holds exactly.
Embedding royal_embedding() {
    const std::vector<std::string> words{"man", "woman", "king", "queen", "apple"};
    const std::vector<std::vector<float>> rows{{1, 0}, {1, 1}, {3, 0.2f}, {3, 1.2f}, {-1, -0.3f}};
    Embedding e;
    e.vocab = std::make_shared<const Vocabulary>(words, std::vector<std::uint64_t>{50, 40, 30, 20, 10});
    e.input = Matrix<float>(words.size(), 2);
    e.output = Matrix<float>(words.size(), 2);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t d = 0; d < 2; ++d) e.input(i, d) = rows[i][d];
    return e;
}

}  // namespace

TEST_CASE("parse_questions") {
    std::istringstream in(
        ": capital-common\n"
        "Athens Greece Baghdad Iraq\n"
        "athens greece athens greece\n"
        "too few words\n"
        "\n"
        ": empty-section\n"
        ": family\n"
        "boy girl brother sister\n"
        "one two three four five\n");
    const auto suite = parse_questions(in);
    REQUIRE(suite.relations.size() == 2);
    CHECK(suite.relations[0].name == "capital-common");
    CHECK(suite.relations[0].questions.size() == 1);
    CHECK(suite.relations[0].questions[0].a == "athens");
    CHECK(suite.relations[0].questions[0].d == "iraq");
    CHECK(suite.relations[1].name == "family");
    CHECK(suite.malformed_lines == 3);
    CHECK(suite.question_count() == 2);

    std::istringstream nothing(": a\nx y\n");
    CHECK_THROWS(parse_questions(nothing));
    std::istringstream orphan("a b c d\n");
    CHECK_THROWS(parse_questions(orphan));
    CHECK_THROWS(load_questions("/nonexistent/questions.txt"));
}

TEST_CASE("3CosAdd solves a planted analogy") {
    const auto e = royal_embedding();
    CHECK(answer("man", "woman", "king", e) == "queen");
    CHECK(answer("woman", "man", "queen", e) == "king");
    // Out-of-vocabulary and outside-the-search-space inputs are unanswerable.
    CHECK_FALSE(answer("man", "woman", "prince", e).has_value());
    CHECK_FALSE(answer("man", "woman", "king", e, 2).has_value());
}

TEST_CASE("the answer never repeats a question word") {
    const auto e = scalevec::testing::random_embedding(30, 6, 2);
    const AnalogySolver solver(e, 30);
    for (WordId a = 0; a < 10; ++a) {
        const auto r = solver.answer_ids(a, a + 1, a + 2);
        REQUIRE(r.has_value());
        CHECK(*r != a);
        CHECK(*r != a + 1);
        CHECK(*r != a + 2);
    }
    // Degenerate a = b = c still excludes the word.
    const auto r = solver.answer_ids(4, 4, 4);
    REQUIRE(r.has_value());
    CHECK(*r != 4);
}

TEST_CASE("3CosAdd agrees with brute-force enumeration") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto e = scalevec::testing::random_embedding(300, 12, seed);
        for (std::size_t k : {std::size_t{300}, std::size_t{120}}) {
            const AnalogySolver solver(e, k);
            std::mt19937_64 rng(seed * 31 + k);
            std::uniform_int_distribution<WordId> pick(0, static_cast<WordId>(k - 1));
            for (int q = 0; q < 60; ++q) {
                const WordId a = pick(rng), b = pick(rng), c = pick(rng);
                CHECK(solver.answer_ids(a, b, c) == scalevec::testing::brute_force_analogy(e, a, b, c, k));
            }
        }
    }
}

TEST_CASE("answers are invariant to rescaling each vector") {
    auto e = scalevec::testing::random_embedding(80, 10, 9);
    const AnalogySolver original(e, 80);
    std::vector<std::optional<WordId>> before;
    for (WordId a = 0; a < 20; ++a) before.push_back(original.answer_ids(a, a + 20, a + 40));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> factor(0.1f, 10.0f);
    for (std::size_t r = 0; r < e.size(); ++r) {
        const float f = factor(rng);
        for (auto& x : e.input.row(r)) x *= f;
    }
    const AnalogySolver scaled(e, 80);
    for (WordId a = 0; a < 20; ++a) CHECK(scaled.answer_ids(a, a + 20, a + 40) == before[a]);
}

TEST_CASE("relation accuracy counts, skips and bounds") {
    const auto e = royal_embedding();
    RelationSet rel{"gender",
                    {{"man", "woman", "king", "queen"},
                     {"woman", "man", "queen", "king"},
                     {"man", "woman", "king", "apple"},
                     {"man", "woman", "prince", "princess"},
                     {"man", "woman", "king", "princess"}}};
    const auto acc = eval_relation(rel, e);
    CHECK(acc.answered == 3);
    CHECK(acc.skipped == 2);
    CHECK(acc.correct == 2);
    REQUIRE(acc.accuracy().has_value());
    CHECK(*acc.accuracy() == doctest::Approx(2.0 / 3.0));

    RelationSet none{"none", {{"x", "y", "z", "w"}}};
    const auto undefined = eval_relation(none, e);
    CHECK(undefined.answered == 0);
    CHECK_FALSE(undefined.accuracy().has_value());
}

TEST_CASE("peak ties go to the smallest beta") {
    const std::vector<std::optional<double>> flat{0.5, 0.9, 0.9, 0.2};
    CHECK(peak_index(flat) == 1u);
    const std::vector<std::optional<double>> gaps{std::nullopt, 0.3, std::nullopt, 0.3};
    CHECK(peak_index(gaps) == 1u);
    const std::vector<std::optional<double>> empty{std::nullopt, std::nullopt};
    CHECK_FALSE(peak_index(empty).has_value());
}

TEST_CASE("accuracy curves over a source") {
    auto e = std::make_shared<const Embedding>(royal_embedding());
    // A second embedding where "apple" beats "queen".
    auto broken = royal_embedding();
    broken.input(3, 0) = -5.0f;
    broken.input(4, 0) = 3.0f;
    broken.input(4, 1) = 1.2f;
    auto b = std::make_shared<const Embedding>(broken);

    InMemorySource source({1, 4, 9}, 2);
    source.put(1, 0, b);
    source.put(1, 1, b);
    source.put(4, 0, e);
    source.put(4, 1, b);
    source.put(9, 0, e);  // replica 1 missing

    QuestionSuite suite;
    suite.relations.push_back({"gender", {{"man", "woman", "king", "queen"}}});
    const auto report = accuracy_curves(source, suite);
    REQUIRE(report.relations.size() == 1);
    const auto& curve = report.relations[0];
    CHECK(curve.betas == std::vector<std::uint32_t>{1, 4, 9});
    REQUIRE(curve.mean[0].has_value());
    CHECK(*curve.mean[0] == 0.0);
    CHECK(*curve.mean[1] == doctest::Approx(0.5));
    CHECK(*curve.mean[2] == 1.0);
    CHECK_FALSE(curve.per_replica[2][1].has_value());
    CHECK(curve.peak_beta == 9u);
    CHECK(curve.replica_peak_beta[0] == 4u);
    CHECK(curve.replica_peak_beta[1] == 1u);
    CHECK(report.overall.relation == "overall");

    std::ostringstream tsv;
    write_accuracy_tsv(report, tsv);
    CHECK(tsv.str().rfind("relation\tbeta\treplica\taccuracy\tanswered\tskipped\n", 0) == 0);
    std::ostringstream json;
    write_accuracy_json(report, json);
    CHECK(nlohmann::json::parse(json.str()).is_object());
}
