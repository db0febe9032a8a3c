#pragma once

// Synthetic corpus with two analogy relations planted at known lags.
//
// Relation "adjacent": each pair (a_i, b_i) shares a signature word placed
// immediately before the pair word; the form (a vs b) is carried by a marker
// immediately after it. Relation "distant": same construction, but the
// signature sits `lag` positions before the word and the marker `lag`
// positions after it, with random filler in between. Everything else is
// uniform filler. An embedding can only solve "distant" analogies once its
// window reaches the lag, so its accuracy should peak at a larger scale than
// "adjacent".

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "scalevec/analogy.hpp"
#include "scalevec/corpus.hpp"

namespace scalevec::testing {

struct PlantedSpec {
    std::size_t target_tokens = 5'000'000;
    std::size_t fillers = 1000;
    std::size_t adjacent_pairs = 10;
    std::size_t distant_pairs = 10;
    std::size_t lag = 20;
    double distant_share = 0.5;  // probability an event is a distant one
    std::size_t max_gap = 8;     // filler run between events: uniform 1..max_gap
    std::uint64_t seed = 7;
};

struct PlantedCorpus {
    TokenStream tokens;
    QuestionSuite suite;
};

// Letters-only name: prefix + base-26 digits of i.
inline std::string planted_word(const std::string& prefix, std::size_t i) {
    std::string suffix;
    do {
        suffix.insert(suffix.begin(), static_cast<char>('a' + i % 26));
        i /= 26;
    } while (i > 0);
    return prefix + suffix;
}

inline RelationSet planted_relation(const std::string& name, const std::vector<std::string>& base,
                                    const std::vector<std::string>& derived) {
    RelationSet rel{name, {}};
    for (std::size_t i = 0; i < base.size(); ++i) {
        for (std::size_t j = 0; j < base.size(); ++j) {
            if (i != j) rel.questions.push_back({base[i], derived[i], base[j], derived[j]});
        }
    }
    return rel;
}

inline PlantedCorpus make_planted_corpus(const PlantedSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::vector<std::string> fillers;
    for (std::size_t i = 0; i < spec.fillers; ++i) fillers.push_back(planted_word("fil", i));

    struct Relation {
        std::vector<std::string> base, derived, signature;
        std::string base_marker, derived_marker;
    };
    auto make_relation = [](const std::string& tag, std::size_t pairs) {
        Relation r;
        for (std::size_t i = 0; i < pairs; ++i) {
            r.base.push_back(planted_word(tag + "base", i));
            r.derived.push_back(planted_word(tag + "der", i));
            r.signature.push_back(planted_word(tag + "sig", i));
        }
        r.base_marker = tag + "markbase";
        r.derived_marker = tag + "markder";
        return r;
    };
    const Relation adjacent = make_relation("adj", spec.adjacent_pairs);
    const Relation distant = make_relation("dis", spec.distant_pairs);

    std::uniform_int_distribution<std::size_t> filler_pick(0, fillers.size() - 1);
    std::uniform_int_distribution<std::size_t> gap_pick(1, spec.max_gap);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution distant_event(spec.distant_share);

    PlantedCorpus out;
    auto& t = out.tokens;
    t.reserve(spec.target_tokens + 64);
    auto filler = [&]() { t.push_back(fillers[filler_pick(rng)]); };

    while (t.size() < spec.target_tokens) {
        const bool is_distant = distant_event(rng);
        const Relation& rel = is_distant ? distant : adjacent;
        const std::size_t pair = std::uniform_int_distribution<std::size_t>(0, rel.base.size() - 1)(rng);
        const bool derived = coin(rng);
        const std::size_t inner = is_distant ? spec.lag - 1 : 0;

        t.push_back(rel.signature[pair]);
        for (std::size_t k = 0; k < inner; ++k) filler();
        t.push_back(derived ? rel.derived[pair] : rel.base[pair]);
        for (std::size_t k = 0; k < inner; ++k) filler();
        t.push_back(derived ? rel.derived_marker : rel.base_marker);

        const std::size_t gap = gap_pick(rng);
        for (std::size_t k = 0; k < gap; ++k) filler();
    }

    out.suite.relations.push_back(planted_relation("adjacent", adjacent.base, adjacent.derived));
    out.suite.relations.push_back(planted_relation("distant", distant.base, distant.derived));
    return out;
}

}  // namespace scalevec::testing
