#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "scalevec/corpus.hpp"

using namespace scalevec;
namespace fs = std::filesystem;

namespace {

std::string join(const TokenStream& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

bool is_clean_token(const std::string& t) {
    return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("scalevec_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("spell_digit names every digit") {
    CHECK(spell_digit('3') == "three");
    CHECK(spell_digit('0') == "zero");
    CHECK(spell_digit('9') == "nine");
    CHECK_THROWS_AS(spell_digit('a'), ContractViolation);
    CHECK_THROWS_AS(spell_digit(' '), ContractViolation);
}

TEST_CASE("clean_text applies the character rules") {
    CHECK(clean_text("30").tokens == TokenStream{"three", "zero"});
    CHECK(clean_text("").tokens.empty());
    CHECK(clean_text("E-mail ME!").tokens == TokenStream{"e", "mail", "me"});
    CHECK(clean_text("abc123def").tokens == TokenStream{"abc", "one", "two", "three", "def"});
    CHECK(clean_text("  \t\n ").tokens.empty());
}

TEST_CASE("clean_text treats valid non-ASCII characters as separators") {
    // U+00E9 (2 bytes), U+20AC (3 bytes), U+1F600 (4 bytes)
    CHECK(clean_text("caf\xC3\xA9s").tokens == TokenStream{"caf", "s"});
    CHECK(clean_text("a\xE2\x82\xAC" "b").tokens == TokenStream{"a", "b"});
    CHECK(clean_text("x\xF0\x9F\x98\x80y").tokens == TokenStream{"x", "y"});
    CHECK(clean_text("caf\xC3\xA9s").invalid_bytes == 0);
}

TEST_CASE("clean_text drops and counts invalid UTF-8") {
    auto r = clean_text("ab\xFF" "cd");
    CHECK(r.tokens == TokenStream{"abcd"});
    CHECK(r.invalid_bytes == 1);

    // Truncated 3-byte sequence followed by ASCII.
    r = clean_text("a\xE2\x82z");
    CHECK(r.tokens == TokenStream{"az"});
    CHECK(r.invalid_bytes == 2);

    // Overlong encoding of '/' and a lone continuation byte.
    r = clean_text("\xC0\xAFq\x80");
    CHECK(r.tokens == TokenStream{"q"});
    CHECK(r.invalid_bytes == 3);

    // Sequence cut off at end of input.
    r = clean_text("ok\xE2");
    CHECK(r.tokens == TokenStream{"ok"});
    CHECK(r.invalid_bytes == 1);
}

TEST_CASE("TextCleaner joins tokens across chunk boundaries") {
    const std::string text = "Hello W\xC3\xB6rld 42 foo-bar";
    const auto whole = clean_text(text).tokens;
    for (std::size_t cut = 0; cut <= text.size(); ++cut) {
        TextCleaner cleaner;
        TokenStream got;
        auto sink = [&](std::string_view t) { got.emplace_back(t); };
        cleaner.feed(std::string_view(text).substr(0, cut), sink);
        cleaner.feed(std::string_view(text).substr(cut), sink);
        cleaner.finish(sink);
        CHECK(got == whole);
    }
}

TEST_CASE("clean_text properties on random bytes") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int trial = 0; trial < 300; ++trial) {
        std::string raw(static_cast<std::size_t>(byte(rng)), '\0');
        for (auto& c : raw) c = static_cast<char>(byte(rng));
        const auto tokens = clean_text(raw).tokens;
        for (const auto& t : tokens) REQUIRE(is_clean_token(t));
        // Idempotence: re-cleaning the space-joined output reproduces it.
        CHECK(clean_text(join(tokens)).tokens == tokens);
    }
}

TEST_CASE("build_vocab counts, orders and thresholds") {
    const TokenStream s{"a", "b", "a"};
    auto v = build_vocab(s, 1);
    REQUIRE(v.size() == 2);
    CHECK(v.word(0) == "a");
    CHECK(v.count(0) == 2);
    CHECK(v.word(1) == "b");
    CHECK(v.count(1) == 1);
    CHECK(v.total_tokens() == 3);

    v = build_vocab(s, 2);
    REQUIRE(v.size() == 1);
    CHECK(v.word(0) == "a");
    CHECK(v.total_tokens() == 2);

    CHECK_THROWS_AS(build_vocab({}, 1), EmptyCorpusError);
}

TEST_CASE("build_vocab breaks count ties by first occurrence") {
    const auto v = build_vocab({"z", "y", "x", "y", "z", "x"}, 1);
    CHECK(v.words() == std::vector<std::string>{"z", "y", "x"});
}

TEST_CASE("vocabulary invariants on random streams") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        TokenStream s;
        const auto n = std::uniform_int_distribution<int>(1, 400)(rng);
        std::geometric_distribution<int> pick(0.15);
        for (int i = 0; i < n; ++i) s.push_back(std::string(1, static_cast<char>('a' + pick(rng) % 26)));
        const auto v = build_vocab(s, 1);
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum += v.count(static_cast<WordId>(i));
            CHECK(*v.find(v.word(static_cast<WordId>(i))) == i);
            if (i > 0) CHECK(v.count(static_cast<WordId>(i)) <= v.count(static_cast<WordId>(i - 1)));
        }
        CHECK(sum == s.size());
        const auto v3 = build_vocab(s, 3);
        for (auto c : v3.counts()) CHECK(c >= 3);
    }
}

TEST_CASE("VocabCounter shards merge independent of order") {
    const TokenStream s{"q", "r", "q", "s", "r", "t", "t", "t", "s", "q"};
    VocabCounter whole;
    for (const auto& t : s) whole.add(t);

    VocabCounter left(0), right(5);
    for (std::size_t i = 0; i < 5; ++i) left.add(s[i]);
    for (std::size_t i = 5; i < s.size(); ++i) right.add(s[i]);

    VocabCounter lr = left, rl = right;
    lr.merge(right);
    rl.merge(left);
    CHECK(lr.finalize(1) == whole.finalize(1));
    CHECK(rl.finalize(1) == whole.finalize(1));
}

TEST_CASE("encode drops out-of-vocabulary tokens") {
    const Vocabulary v({"a", "b"}, {2, 1});
    CHECK(encode({"a", "x", "b"}, v) == std::vector<WordId>{0, 1});
    CHECK(encode({}, v).empty());
    CHECK(encode({"a", "a"}, v) == std::vector<WordId>{0, 0});
}

TEST_CASE("subsample_keep_prob") {
    const double t = 1e-4;
    CHECK(subsample_keep_prob(1, 10000, t) == doctest::Approx(1.0));  // f = t
    // f = 100 t: (sqrt(100) + 1) / 100
    CHECK(subsample_keep_prob(100, 10000, t) == doctest::Approx(0.11).epsilon(1e-12));
    CHECK(subsample_keep_prob(1, 100, t) == doctest::Approx(0.11).epsilon(1e-12));
    CHECK(subsample_keep_prob(7, 100, std::numeric_limits<double>::infinity()) == 1.0);
    CHECK_THROWS_AS(subsample_keep_prob(1, 0, t), ContractViolation);

    // Bounded and strictly decreasing above the threshold.
    double previous = 2.0;
    for (std::uint64_t count = 2; count <= 10000; count += 7) {
        const double p = subsample_keep_prob(count, 10000, t);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(p < previous);
        previous = p;
    }
}

TEST_CASE("vocabulary and token files round-trip") {
    const auto dir = temp_dir("corpus_io");
    const Vocabulary v({"the", "cat", "sat"}, {5, 3, 3});
    save_vocab(v, dir / "vocab.tsv");
    CHECK(load_vocab(dir / "vocab.tsv") == v);

    std::ifstream raw(dir / "vocab.tsv");
    std::string first;
    std::getline(raw, first);
    CHECK(first == "the\t5");

    const std::vector<WordId> ids{0, 2, 1, 0, 4000000000u};
    save_tokens(ids, dir / "tokens.bin");
    CHECK(load_tokens(dir / "tokens.bin") == ids);
    CHECK(fs::file_size(dir / "tokens.bin") == 8 + 4 * ids.size());

    std::ifstream tok(dir / "tokens.bin", std::ios::binary);
    std::string magic(8, '\0');
    tok.read(magic.data(), 8);
    CHECK(magic == "STVTOK01");

    // Truncation and bad magic are integrity errors.
    fs::resize_file(dir / "tokens.bin", 8 + 4 * ids.size() - 2);
    CHECK_THROWS_AS(load_tokens(dir / "tokens.bin"), IntegrityError);
    std::ofstream(dir / "bad.bin") << "NOTATOKN";
    CHECK_THROWS_AS(load_tokens(dir / "bad.bin"), IntegrityError);
}

TEST_CASE("prepare_corpus streams files and applies min_count") {
    const auto dir = temp_dir("prepare");
    std::ofstream(dir / "a.txt") << "The cat, the DOG. 7 cats";
    std::ofstream(dir / "b.txt") << "the end";
    const auto p = prepare_corpus({dir / "a.txt", dir / "b.txt"}, 2);
    CHECK(p.stats.raw_tokens == 8);
    REQUIRE(p.vocab.size() == 1);
    CHECK(p.vocab.word(0) == "the");
    CHECK(p.ids == std::vector<WordId>{0, 0, 0});

    const auto capped = prepare_corpus({dir / "a.txt"}, 1, 7);  // "The cat"
    CHECK(capped.stats.raw_tokens == 2);

    std::ofstream(dir / "empty.txt") << "!!! ...";
    CHECK_THROWS_AS(prepare_corpus({dir / "empty.txt"}, 1), EmptyCorpusError);
}
