#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scalevec/cbow.hpp"
#include "scalevec/sweep.hpp"

namespace scalevec {

// "a is to b as c is to d".
struct AnalogyQuestion {
    std::string a, b, c, d;
};

struct RelationSet {
    std::string name;
    std::vector<AnalogyQuestion> questions;
};

struct QuestionSuite {
    std::vector<RelationSet> relations;
    std::size_t malformed_lines = 0;

    std::size_t question_count() const;
};

// Task format: `: relation-name` opens a section, other non-blank lines hold
// four whitespace-separated words. Words are lowercased. Lines that are not
// four distinct words, or questions before the first section, are counted as
// malformed and skipped. Throws if no valid question remains.
QuestionSuite parse_questions(std::istream& in);
QuestionSuite load_questions(const std::filesystem::path& path);

inline constexpr std::size_t kDefaultRestrictK = 30000;

// 3CosAdd over unit-normalised input vectors of the restrict_k most frequent
// words: argmax_w cos(v_w, v_b - v_a + v_c), w not in {a, b, c}.
class AnalogySolver {
public:
    AnalogySolver(const Embedding& embedding, std::size_t restrict_k = kDefaultRestrictK);

    // nullopt when a, b or c is outside the search space.
    std::optional<WordId> answer(std::string_view a, std::string_view b, std::string_view c) const;
    std::optional<WordId> answer_ids(WordId a, WordId b, WordId c) const;

    // Id of `word` if it lies inside the search space.
    std::optional<WordId> lookup(std::string_view word) const;

    std::size_t search_size() const { return limit_; }
    const Embedding& embedding() const { return embedding_; }

private:
    const Embedding& embedding_;
    std::size_t limit_;
    Matrix<float> unit_;
};

std::optional<std::string> answer(std::string_view a, std::string_view b, std::string_view c,
                                  const Embedding& embedding, std::size_t restrict_k = kDefaultRestrictK);

struct RelationAccuracy {
    std::string relation;
    std::size_t answered = 0;
    std::size_t skipped = 0;
    std::size_t correct = 0;

    // Undefined when nothing was answered.
    std::optional<double> accuracy() const;
};

RelationAccuracy eval_relation(const RelationSet& relation, const AnalogySolver& solver);
RelationAccuracy eval_relation(const RelationSet& relation, const Embedding& embedding,
                               std::size_t restrict_k = kDefaultRestrictK);

struct RelationAccuracyCurve {
    std::string relation;  // "overall" for the pooled curve
    std::vector<std::uint32_t> betas;
    // [beta][replica]; nullopt for a missing cell or zero answered questions.
    std::vector<std::vector<std::optional<double>>> per_replica;
    std::vector<std::vector<RelationAccuracy>> counts;
    // Mean over the defined replicas; nullopt if none.
    std::vector<std::optional<double>> mean;
    std::optional<std::uint32_t> peak_beta;
    std::vector<std::optional<std::uint32_t>> replica_peak_beta;
};

struct AccuracyReport {
    std::vector<RelationAccuracyCurve> relations;
    RelationAccuracyCurve overall;
};

// Finalises means and peaks of a curve whose per_replica values are set.
void summarize_curve(RelationAccuracyCurve& curve);

AccuracyReport accuracy_curves(const EmbeddingSource& source, const QuestionSuite& suite,
                               std::size_t restrict_k = kDefaultRestrictK);

// relation, beta, replica, accuracy, answered, skipped (accuracy "NA" when
// undefined, "missing" rows for absent cells).
void write_accuracy_tsv(const AccuracyReport& report, std::ostream& out);
// relation, peak_beta, peak_accuracy
void write_peak_summary_tsv(const AccuracyReport& report, std::ostream& out);
// JSON panel data: per relation the beta grid, mean curve and peak.
void write_accuracy_json(const AccuracyReport& report, std::ostream& out);

}  // namespace scalevec
