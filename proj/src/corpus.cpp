#include "scalevec/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

namespace scalevec {

namespace {

constexpr std::array<std::string_view, 10> kDigitNames = {"zero", "one", "two",   "three", "four",
                                                           "five", "six", "seven", "eight", "nine"};

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::string_view spell_digit(char digit) {
    if (digit < '0' || digit > '9') {
        throw ContractViolation(std::string("spell_digit: not an ASCII digit: '") + digit + "'");
    }
    return kDigitNames[static_cast<std::size_t>(digit - '0')];
}

void TextCleaner::separator(const Sink& sink) {
    if (!current_.empty()) {
        sink(current_);
        current_.clear();
    }
}

void TextCleaner::flush_pending_invalid() {
    invalid_bytes_ += static_cast<std::uint64_t>(1 + seen_continuations_);
    expected_continuations_ = 0;
    seen_continuations_ = 0;
}

void TextCleaner::feed(std::string_view chunk, const Sink& sink) {
    for (char ch : chunk) {
        const auto c = static_cast<unsigned char>(ch);

        if (expected_continuations_ > 0) {
            bool ok = is_continuation(c);
            // Reject overlong forms and surrogates on the second byte.
            if (ok && seen_continuations_ == 0) {
                if (lead_ == 0xE0 && c < 0xA0) ok = false;
                if (lead_ == 0xED && c > 0x9F) ok = false;
                if (lead_ == 0xF0 && c < 0x90) ok = false;
                if (lead_ == 0xF4 && c > 0x8F) ok = false;
            }
            if (ok) {
                if (++seen_continuations_ == expected_continuations_) {
                    // A complete non-ASCII character separates tokens.
                    expected_continuations_ = 0;
                    seen_continuations_ = 0;
                    separator(sink);
                }
                continue;
            }
            flush_pending_invalid();
            // fall through: reprocess c as a fresh byte
        }

        if (c < 0x80) {
            if (c >= 'a' && c <= 'z') {
                current_.push_back(static_cast<char>(c));
            } else if (c >= 'A' && c <= 'Z') {
                current_.push_back(static_cast<char>(c - 'A' + 'a'));
            } else if (c >= '0' && c <= '9') {
                separator(sink);
                sink(spell_digit(static_cast<char>(c)));
            } else {
                separator(sink);
            }
        } else if (c >= 0xC2 && c <= 0xDF) {
            lead_ = c;
            expected_continuations_ = 1;
        } else if (c >= 0xE0 && c <= 0xEF) {
            lead_ = c;
            expected_continuations_ = 2;
        } else if (c >= 0xF0 && c <= 0xF4) {
            lead_ = c;
            expected_continuations_ = 3;
        } else {
            ++invalid_bytes_;
        }
    }
}

void TextCleaner::finish(const Sink& sink) {
    if (expected_continuations_ > 0) flush_pending_invalid();
    separator(sink);
}

CleanResult clean_text(std::string_view raw) {
    CleanResult result;
    TextCleaner cleaner;
    auto sink = [&](std::string_view token) { result.tokens.emplace_back(token); };
    cleaner.feed(raw, sink);
    cleaner.finish(sink);
    result.invalid_bytes = cleaner.invalid_bytes();
    return result;
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts)
    : words_(std::move(words)), counts_(std::move(counts)) {
    require(words_.size() == counts_.size(), "Vocabulary: words and counts differ in length");
    require(words_.size() <= std::numeric_limits<WordId>::max(), "Vocabulary: too many words");
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        require(!words_[i].empty(), "Vocabulary: empty word");
        require(counts_[i] > 0, "Vocabulary: counts must be positive");
        if (i > 0) require(counts_[i] <= counts_[i - 1], "Vocabulary: counts must be non-increasing");
        if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
            throw ContractViolation("Vocabulary: duplicate word '" + words_[i] + "'");
        }
        total_ += counts_[i];
    }
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t Vocabulary::fingerprint() const {
    Fnv1a h;
    for (std::size_t i = 0; i < words_.size(); ++i) {
        h.update(words_[i]);
        h.update(std::string_view("\t"));
        h.update_value(counts_[i]);
    }
    return h.digest();
}

void VocabCounter::add(std::string_view token) {
    auto [it, inserted] = entries_.try_emplace(std::string(token));
    if (inserted) it->second.first_seen = position_;
    ++it->second.count;
    ++position_;
    ++seen_;
}

void VocabCounter::merge(const VocabCounter& other) {
    for (const auto& [word, entry] : other.entries_) {
        auto [it, inserted] = entries_.try_emplace(word, entry);
        if (!inserted) {
            it->second.count += entry.count;
            it->second.first_seen = std::min(it->second.first_seen, entry.first_seen);
        }
    }
    seen_ += other.seen_;
    position_ = std::max(position_, other.position_);
}

Vocabulary VocabCounter::finalize(std::uint64_t min_count) const {
    require(min_count >= 1, "build_vocab: min_count must be positive");
    if (seen_ == 0) throw EmptyCorpusError();

    struct Row {
        const std::string* word;
        Entry entry;
    };
    std::vector<Row> rows;
    rows.reserve(entries_.size());
    for (const auto& [word, entry] : entries_) {
        if (entry.count >= min_count) rows.push_back({&word, entry});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.entry.count != b.entry.count) return a.entry.count > b.entry.count;
        return a.entry.first_seen < b.entry.first_seen;
    });

    std::vector<std::string> words;
    std::vector<std::uint64_t> counts;
    words.reserve(rows.size());
    counts.reserve(rows.size());
    for (const auto& row : rows) {
        words.push_back(*row.word);
        counts.push_back(row.entry.count);
    }
    return Vocabulary(std::move(words), std::move(counts));
}

Vocabulary build_vocab(const TokenStream& stream, std::uint64_t min_count) {
    VocabCounter counter;
    for (const auto& token : stream) counter.add(token);
    return counter.finalize(min_count);
}

std::vector<WordId> encode(const TokenStream& stream, const Vocabulary& vocab) {
    std::vector<WordId> ids;
    ids.reserve(stream.size());
    for (const auto& token : stream) {
        if (auto id = vocab.find(token)) ids.push_back(*id);
    }
    return ids;
}

double subsample_keep_prob(std::uint64_t word_count, std::uint64_t total_tokens, double threshold) {
    require(total_tokens > 0, "subsample_keep_prob: total_tokens must be positive");
    require(word_count > 0, "subsample_keep_prob: word_count must be positive");
    require(threshold > 0.0, "subsample_keep_prob: threshold must be positive");
    if (std::isinf(threshold)) return 1.0;
    const double f = static_cast<double>(word_count) / static_cast<double>(total_tokens);
    const double keep = (std::sqrt(f / threshold) + 1.0) * (threshold / f);
    return std::min(1.0, keep);
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open vocabulary file for writing: " + path.string());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        out << vocab.word(static_cast<WordId>(i)) << '\t' << vocab.count(static_cast<WordId>(i)) << '\n';
    }
    if (!out) throw IoError("failed writing vocabulary file: " + path.string());
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file: " + path.string());
    std::vector<std::string> words;
    std::vector<std::uint64_t> counts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw IntegrityError(path.string() + ":" + std::to_string(line_no) + ": expected word<TAB>count");
        }
        words.push_back(line.substr(0, tab));
        try {
            counts.push_back(std::stoull(line.substr(tab + 1)));
        } catch (const std::exception&) {
            throw IntegrityError(path.string() + ":" + std::to_string(line_no) + ": bad count");
        }
    }
    try {
        return Vocabulary(std::move(words), std::move(counts));
    } catch (const ContractViolation& e) {
        throw IntegrityError(path.string() + ": " + e.what());
    }
}

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

void save_tokens(std::span<const WordId> ids, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open token file for writing: " + path.string());
    out.write(kTokenMagic.data(), static_cast<std::streamsize>(kTokenMagic.size()));
    out.write(reinterpret_cast<const char*>(ids.data()), static_cast<std::streamsize>(ids.size_bytes()));
    if (!out) throw IoError("failed writing token file: " + path.string());
}

std::vector<WordId> load_tokens(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open token file: " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::string magic(kTokenMagic.size(), '\0');
    if (size < magic.size() || !in.read(magic.data(), static_cast<std::streamsize>(magic.size())) ||
        magic != kTokenMagic) {
        throw IntegrityError("not a token file (bad magic): " + path.string());
    }
    const std::size_t payload = size - magic.size();
    if (payload % sizeof(WordId) != 0) throw IntegrityError("truncated token file: " + path.string());
    std::vector<WordId> ids(payload / sizeof(WordId));
    in.read(reinterpret_cast<char*>(ids.data()), static_cast<std::streamsize>(payload));
    if (!in) throw IntegrityError("truncated token file: " + path.string());
    return ids;
}

std::uint64_t corpus_fingerprint(std::span<const WordId> ids) {
    Fnv1a h;
    h.update(std::as_bytes(ids));
    return h.digest();
}

namespace {

template <typename Visit>
std::uint64_t stream_files(const std::vector<std::filesystem::path>& inputs, std::uint64_t max_bytes,
                           Visit&& visit) {
    TextCleaner cleaner;
    auto sink = [&](std::string_view token) { visit(token); };
    std::vector<char> buffer(1 << 20);
    std::uint64_t consumed = 0;
    for (const auto& path : inputs) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open input: " + path.string());
        while (in && (max_bytes == 0 || consumed < max_bytes)) {
            std::size_t want = buffer.size();
            if (max_bytes != 0) want = std::min<std::uint64_t>(want, max_bytes - consumed);
            in.read(buffer.data(), static_cast<std::streamsize>(want));
            const auto got = static_cast<std::size_t>(in.gcount());
            if (got == 0) break;
            consumed += got;
            cleaner.feed({buffer.data(), got}, sink);
        }
        // Files are separate documents; a token never spans two of them.
        cleaner.finish(sink);
    }
    return cleaner.invalid_bytes();
}

}  // namespace

PreparedCorpus prepare_corpus(const std::vector<std::filesystem::path>& inputs, std::uint64_t min_count,
                              std::uint64_t max_bytes) {
    PreparedCorpus result;
    VocabCounter counter;
    result.stats.invalid_bytes = stream_files(inputs, max_bytes, [&](std::string_view t) { counter.add(t); });
    result.stats.raw_tokens = counter.tokens_seen();
    result.vocab = counter.finalize(min_count);
    result.ids.reserve(result.vocab.total_tokens());
    stream_files(inputs, max_bytes, [&](std::string_view t) {
        if (auto id = result.vocab.find(t)) result.ids.push_back(*id);
    });
    result.stats.kept_tokens = result.ids.size();
    result.stats.distinct_words = result.vocab.size();
    return result;
}

}  // namespace scalevec
