#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scalevec/common.hpp"

namespace scalevec {

using WordId = std::uint32_t;
using TokenStream = std::vector<std::string>;

// Returns the English name of an ASCII digit, e.g. '3' -> "three".
std::string_view spell_digit(char digit);

// Incremental text cleaner. Lowercases ASCII letters, spells out each digit
// as its own token and treats every other character as a separator. Bytes
// that are not valid UTF-8 are dropped and counted. Tokens may span chunk
// boundaries.
class TextCleaner {
public:
    using Sink = std::function<void(std::string_view)>;

    void feed(std::string_view chunk, const Sink& sink);
    void finish(const Sink& sink);

    std::uint64_t invalid_bytes() const { return invalid_bytes_; }

private:
    void separator(const Sink& sink);
    void flush_pending_invalid();

    std::string current_;
    // Bytes of a UTF-8 sequence still being validated.
    int expected_continuations_ = 0;
    int seen_continuations_ = 0;
    unsigned char lead_ = 0;
    std::uint64_t invalid_bytes_ = 0;
};

struct CleanResult {
    TokenStream tokens;
    std::uint64_t invalid_bytes = 0;
};

CleanResult clean_text(std::string_view raw);

// Bijective word <-> id map ordered by descending count, ties by first
// occurrence.
class Vocabulary {
public:
    Vocabulary() = default;

    // Takes words already in id order; validates ordering and uniqueness.
    Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts);

    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    const std::string& word(WordId id) const { return words_.at(id); }
    std::uint64_t count(WordId id) const { return counts_.at(id); }
    std::optional<WordId> find(std::string_view word) const;
    std::uint64_t total_tokens() const { return total_; }

    const std::vector<std::string>& words() const { return words_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

    std::uint64_t fingerprint() const;

    bool operator==(const Vocabulary& other) const {
        return words_ == other.words_ && counts_ == other.counts_;
    }

private:
    std::vector<std::string> words_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, WordId> index_;
    std::uint64_t total_ = 0;
};

// Accumulates word counts. Shards built independently merge order-free when
// each shard is given its global token offset.
class VocabCounter {
public:
    explicit VocabCounter(std::uint64_t position_base = 0) : position_(position_base) {}

    void add(std::string_view token);
    void merge(const VocabCounter& other);
    std::uint64_t tokens_seen() const { return seen_; }

    Vocabulary finalize(std::uint64_t min_count) const;

private:
    struct Entry {
        std::uint64_t count = 0;
        std::uint64_t first_seen = 0;
    };
    std::unordered_map<std::string, Entry> entries_;
    std::uint64_t position_;
    std::uint64_t seen_ = 0;
};

Vocabulary build_vocab(const TokenStream& stream, std::uint64_t min_count);

std::vector<WordId> encode(const TokenStream& stream, const Vocabulary& vocab);

// Probability that an occurrence of a word survives frequent-word subsampling.
double subsample_keep_prob(std::uint64_t word_count, std::uint64_t total_tokens, double threshold);

// Vocabulary file: one `word<TAB>count` line per word, descending count.
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

// Token-id file: 8-byte magic `STVTOK01`, then little-endian uint32 ids.
inline constexpr std::string_view kTokenMagic = "STVTOK01";
void save_tokens(std::span<const WordId> ids, const std::filesystem::path& path);
std::vector<WordId> load_tokens(const std::filesystem::path& path);

std::uint64_t corpus_fingerprint(std::span<const WordId> ids);

struct PreprocessStats {
    std::uint64_t raw_tokens = 0;
    std::uint64_t kept_tokens = 0;
    std::uint64_t distinct_words = 0;
    std::uint64_t invalid_bytes = 0;
};

// Streams the input files twice (count, then encode) so the raw token
// sequence is never held in memory.
struct PreparedCorpus {
    Vocabulary vocab;
    std::vector<WordId> ids;
    PreprocessStats stats;
};

PreparedCorpus prepare_corpus(const std::vector<std::filesystem::path>& inputs, std::uint64_t min_count,
                              std::uint64_t max_bytes = 0);

}  // namespace scalevec
