#include "scalevec/analogy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "scalevec/kernels.hpp"
#include "scalevec/peak.hpp"

namespace scalevec {

std::size_t QuestionSuite::question_count() const {
    std::size_t n = 0;
    for (const auto& r : relations) n += r.questions.size();
    return n;
}

QuestionSuite parse_questions(std::istream& in) {
    QuestionSuite suite;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::transform(line.begin(), line.end(), line.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == ':') {
            std::istringstream name(line.substr(first + 1));
            RelationSet rel;
            if (!(name >> rel.name)) {
                ++suite.malformed_lines;
                continue;
            }
            suite.relations.push_back(std::move(rel));
            continue;
        }
        std::istringstream fields(line);
        std::vector<std::string> words;
        for (std::string w; fields >> w;) words.push_back(std::move(w));
        const bool distinct = words.size() == 4 && words[0] != words[1] && words[0] != words[2] &&
                              words[0] != words[3] && words[1] != words[2] && words[1] != words[3] &&
                              words[2] != words[3];
        if (!distinct || suite.relations.empty()) {
            ++suite.malformed_lines;
            continue;
        }
        suite.relations.back().questions.push_back({words[0], words[1], words[2], words[3]});
    }
    std::erase_if(suite.relations, [](const RelationSet& r) { return r.questions.empty(); });
    if (suite.relations.empty()) throw std::runtime_error("analogy task file contains no valid questions");
    return suite;
}

QuestionSuite load_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open questions file: " + path.string());
    try {
        return parse_questions(in);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

AnalogySolver::AnalogySolver(const Embedding& embedding, std::size_t restrict_k)
    : embedding_(embedding), limit_(std::min(restrict_k, embedding.size())), unit_(normalize_rows(embedding.input)) {
    require(restrict_k >= 1, "AnalogySolver: restrict_k must be positive");
}

std::optional<WordId> AnalogySolver::lookup(std::string_view word) const {
    auto id = embedding_.vocab->find(word);
    if (!id || *id >= limit_) return std::nullopt;
    return id;
}

std::optional<WordId> AnalogySolver::answer_ids(WordId a, WordId b, WordId c) const {
    if (a >= limit_ || b >= limit_ || c >= limit_) return std::nullopt;
    const std::size_t dim = unit_.cols();
    std::vector<float> query(dim);
    const auto ua = unit_.row(a), ub = unit_.row(b), uc = unit_.row(c);
    for (std::size_t d = 0; d < dim; ++d) query[d] = ub[d] - ua[d] + uc[d];

    std::vector<float> scores(limit_);
    scan_dot_serial(unit_, query, scores);

    // Every candidate row is unit length (or zero), so the largest dot
    // product is the largest cosine.
    std::optional<WordId> best;
    for (std::size_t w = 0; w < limit_; ++w) {
        if (w == a || w == b || w == c) continue;
        if (!best || scores[w] > scores[*best]) best = static_cast<WordId>(w);
    }
    return best;
}

std::optional<WordId> AnalogySolver::answer(std::string_view a, std::string_view b, std::string_view c) const {
    auto ia = lookup(a), ib = lookup(b), ic = lookup(c);
    if (!ia || !ib || !ic) return std::nullopt;
    return answer_ids(*ia, *ib, *ic);
}

std::optional<std::string> answer(std::string_view a, std::string_view b, std::string_view c,
                                  const Embedding& embedding, std::size_t restrict_k) {
    AnalogySolver solver(embedding, restrict_k);
    auto id = solver.answer(a, b, c);
    if (!id) return std::nullopt;
    return embedding.vocab->word(*id);
}

std::optional<double> RelationAccuracy::accuracy() const {
    if (answered == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(answered);
}

RelationAccuracy eval_relation(const RelationSet& relation, const AnalogySolver& solver) {
    RelationAccuracy acc;
    acc.relation = relation.name;
    const auto n = static_cast<std::ptrdiff_t>(relation.questions.size());
    std::size_t answered = 0, skipped = 0, correct = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : answered, skipped, correct)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& q = relation.questions[static_cast<std::size_t>(i)];
        auto ia = solver.lookup(q.a), ib = solver.lookup(q.b), ic = solver.lookup(q.c), id = solver.lookup(q.d);
        if (!ia || !ib || !ic || !id) {
            ++skipped;
            continue;
        }
        auto predicted = solver.answer_ids(*ia, *ib, *ic);
        if (!predicted) {
            ++skipped;
            continue;
        }
        ++answered;
        if (*predicted == *id) ++correct;
    }
    acc.answered = answered;
    acc.skipped = skipped;
    acc.correct = correct;
    return acc;
}

RelationAccuracy eval_relation(const RelationSet& relation, const Embedding& embedding, std::size_t restrict_k) {
    return eval_relation(relation, AnalogySolver(embedding, restrict_k));
}

void summarize_curve(RelationAccuracyCurve& curve) {
    const std::size_t nb = curve.betas.size();
    curve.mean.assign(nb, std::nullopt);
    for (std::size_t i = 0; i < nb; ++i) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& v : curve.per_replica[i]) {
            if (v) {
                sum += *v;
                ++n;
            }
        }
        if (n > 0) curve.mean[i] = sum / static_cast<double>(n);
    }
    curve.peak_beta.reset();
    if (auto p = peak_index(curve.mean)) curve.peak_beta = curve.betas[*p];

    const std::size_t replicas = nb ? curve.per_replica[0].size() : 0;
    curve.replica_peak_beta.assign(replicas, std::nullopt);
    std::vector<std::optional<double>> column(nb);
    for (std::size_t r = 0; r < replicas; ++r) {
        for (std::size_t i = 0; i < nb; ++i) column[i] = curve.per_replica[i][r];
        if (auto p = peak_index(column)) curve.replica_peak_beta[r] = curve.betas[*p];
    }
}

AccuracyReport accuracy_curves(const EmbeddingSource& source, const QuestionSuite& suite, std::size_t restrict_k) {
    const auto& betas = source.scales();
    const std::size_t nb = betas.size();
    const std::size_t nr = source.replicas();

    auto blank = [&](std::string name) {
        RelationAccuracyCurve c;
        c.relation = std::move(name);
        c.betas = betas;
        c.per_replica.assign(nb, std::vector<std::optional<double>>(nr));
        c.counts.assign(nb, std::vector<RelationAccuracy>(nr));
        return c;
    };

    AccuracyReport report;
    for (const auto& rel : suite.relations) report.relations.push_back(blank(rel.name));
    report.overall = blank("overall");

    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t r = 0; r < nr; ++r) {
            auto embedding = source.get(betas[i], static_cast<std::uint32_t>(r));
            if (!embedding) continue;  // missing: left undefined, never interpolated
            const AnalogySolver solver(*embedding, restrict_k);
            RelationAccuracy pooled;
            pooled.relation = "overall";
            for (std::size_t k = 0; k < suite.relations.size(); ++k) {
                const auto acc = eval_relation(suite.relations[k], solver);
                report.relations[k].per_replica[i][r] = acc.accuracy();
                report.relations[k].counts[i][r] = acc;
                pooled.answered += acc.answered;
                pooled.skipped += acc.skipped;
                pooled.correct += acc.correct;
            }
            report.overall.per_replica[i][r] = pooled.accuracy();
            report.overall.counts[i][r] = pooled;
        }
    }
    for (auto& c : report.relations) summarize_curve(c);
    summarize_curve(report.overall);
    return report;
}

namespace {

std::string format_value(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream s;
    s << std::setprecision(10) << *v;
    return s.str();
}

void write_curve_rows(const RelationAccuracyCurve& c, std::ostream& out) {
    for (std::size_t i = 0; i < c.betas.size(); ++i) {
        for (std::size_t r = 0; r < c.per_replica[i].size(); ++r) {
            const auto& n = c.counts[i][r];
            out << c.relation << '\t' << c.betas[i] << '\t' << r << '\t' << format_value(c.per_replica[i][r]) << '\t'
                << n.answered << '\t' << n.skipped << '\n';
        }
    }
}

}  // namespace

void write_accuracy_tsv(const AccuracyReport& report, std::ostream& out) {
    out << "relation\tbeta\treplica\taccuracy\tanswered\tskipped\n";
    for (const auto& c : report.relations) write_curve_rows(c, out);
    write_curve_rows(report.overall, out);
}

void write_peak_summary_tsv(const AccuracyReport& report, std::ostream& out) {
    out << "relation\tpeak_beta\tpeak_accuracy\n";
    auto row = [&](const RelationAccuracyCurve& c) {
        out << c.relation << '\t';
        if (c.peak_beta) {
            const auto i = static_cast<std::size_t>(
                std::find(c.betas.begin(), c.betas.end(), *c.peak_beta) - c.betas.begin());
            out << *c.peak_beta << '\t' << format_value(c.mean[i]) << '\n';
        } else {
            out << "NA\tNA\n";
        }
    };
    for (const auto& c : report.relations) row(c);
    row(report.overall);
}

void write_accuracy_json(const AccuracyReport& report, std::ostream& out) {
    auto curve_json = [](const RelationAccuracyCurve& c) {
        nlohmann::json mean = nlohmann::json::array();
        for (const auto& v : c.mean) mean.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        nlohmann::json peaks = nlohmann::json::array();
        for (const auto& p : c.replica_peak_beta) peaks.push_back(p ? nlohmann::json(*p) : nlohmann::json(nullptr));
        return nlohmann::json{{"relation", c.relation},
                              {"betas", c.betas},
                              {"mean_accuracy", mean},
                              {"peak_beta", c.peak_beta ? nlohmann::json(*c.peak_beta) : nlohmann::json(nullptr)},
                              {"replica_peak_beta", peaks}};
    };
    nlohmann::json panels = nlohmann::json::array();
    for (const auto& c : report.relations) panels.push_back(curve_json(c));
    out << nlohmann::json{{"relations", panels}, {"overall", curve_json(report.overall)}}.dump(2) << '\n';
}

}  // namespace scalevec
