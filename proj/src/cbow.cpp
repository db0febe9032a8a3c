#include "scalevec/cbow.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace scalevec {

std::string to_string(ContextMode mode) { return mode == ContextMode::averaged ? "averaged" : "pairwise"; }

ContextMode parse_context_mode(std::string_view text) {
    if (text == "averaged") return ContextMode::averaged;
    if (text == "pairwise") return ContextMode::pairwise;
    throw ConfigError("context_mode must be 'averaged' or 'pairwise', got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (beta < 1) throw ConfigError("beta must be >= 1 (and set explicitly)");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ConfigError("alpha0 must be a positive finite number");
    if (!(min_alpha_fraction > 0.0 && min_alpha_fraction <= 1.0)) {
        throw ConfigError("min_alpha_fraction must lie in (0, 1]");
    }
    if (!(subsample_t > 0.0)) throw ConfigError("subsample_t must be positive (inf disables subsampling)");
}

std::uint64_t TrainConfig::fingerprint() const {
    Fnv1a h;
    h.update_value(dim);
    h.update_value(negative);
    h.update_value(subsample_t);
    h.update_value(iterations);
    h.update_value(alpha0);
    h.update_value(min_alpha_fraction);
    h.update(to_string(context_mode));
    return h.digest();
}

void Embedding::validate() const {
    if (!vocab) throw IntegrityError("embedding has no vocabulary");
    if (input.rows() != vocab->size()) throw IntegrityError("input matrix rows do not match vocabulary size");
    if (input.cols() == 0) throw IntegrityError("embedding dimension is zero");
    if (meta.known && meta.dim != input.cols()) throw IntegrityError("metadata dim does not match matrix");
    auto finite = [](std::span<const float> xs) {
        return std::all_of(xs.begin(), xs.end(), [](float x) { return std::isfinite(x); });
    };
    if (!finite(input.data())) throw IntegrityError("input matrix has non-finite entries");
    if (has_output) {
        if (output.rows() != input.rows() || output.cols() != input.cols()) {
            throw IntegrityError("output matrix shape differs from input matrix");
        }
        if (!finite(output.data())) throw IntegrityError("output matrix has non-finite entries");
    }
}

NegativeSampler::NegativeSampler(const Vocabulary& vocab, double power) {
    require(!vocab.empty(), "NegativeSampler: empty vocabulary");
    cumulative_.resize(vocab.size());
    double running = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        running += std::pow(static_cast<double>(vocab.count(static_cast<WordId>(i))), power);
        cumulative_[i] = running;
    }
    for (auto& c : cumulative_) c /= running;
    cumulative_.back() = 1.0;
}

WordId NegativeSampler::draw(Rng& rng) const {
    const double u = std::generate_canonical<double, 53>(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<WordId>(it - cumulative_.begin());
}

double NegativeSampler::probability(WordId id) const {
    require(id < cumulative_.size(), "NegativeSampler: id out of range");
    return id == 0 ? cumulative_[0] : cumulative_[id] - cumulative_[id - 1];
}

double window_inclusion_prob(std::uint32_t k, std::uint32_t beta) {
    require(k >= 1, "window_inclusion_prob: offset must be >= 1 (a target is never its own context)");
    require(beta >= 1, "window_inclusion_prob: beta must be >= 1");
    return std::max(0.0, 1.0 - static_cast<double>(k - 1) / static_cast<double>(beta));
}

std::uint32_t sample_window(std::uint32_t beta, Rng& rng) {
    require(beta >= 1, "sample_window: beta must be >= 1");
    return std::uniform_int_distribution<std::uint32_t>(1, beta)(rng);
}

float score(const Embedding& embedding, std::span<const float> hidden, WordId k) {
    require(k < embedding.size(), "score: word id out of range");
    require(embedding.has_output, "score: embedding has no output vectors");
    require(hidden.size() == embedding.dim(), "score: hidden vector has wrong dimension");
    return dot(embedding.output.row(k), hidden);
}

std::vector<double> softmax(std::span<const double> scores) {
    require(!scores.empty(), "softmax: no scores");
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::domain_error("softmax: non-finite score");
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - top);
        total += out[i];
    }
    for (auto& p : out) p /= total;
    return out;
}

std::vector<double> softmax_posterior(const Embedding& embedding, std::span<const float> hidden) {
    std::vector<double> scores(embedding.size());
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = score(embedding, hidden, static_cast<WordId>(k));
    return softmax(scores);
}

namespace {

template <typename Real>
void mean_context(const Matrix<Real>& input, std::span<const WordId> context, std::span<Real> hidden) {
    std::fill(hidden.begin(), hidden.end(), Real{0});
    for (WordId c : context) {
        auto row = input.row(c);
        for (std::size_t d = 0; d < hidden.size(); ++d) hidden[d] += row[d];
    }
    const Real inv = Real{1} / static_cast<Real>(context.size());
    for (auto& x : hidden) x *= inv;
}

template <typename Real>
Real sigmoid(Real x) {
    return Real{1} / (Real{1} + std::exp(-x));
}

}  // namespace

template <typename Real>
Real negative_sampling_loss(const Matrix<Real>& input, const Matrix<Real>& output, std::span<const WordId> context,
                            WordId target, std::span<const WordId> negatives) {
    require(!context.empty(), "negative_sampling_loss: empty context");
    std::vector<Real> hidden(input.cols());
    mean_context(input, context, std::span<Real>(hidden));
    double loss = -log_sigmoid(static_cast<double>(dot<Real>(output.row(target), hidden)));
    for (WordId n : negatives) loss -= log_sigmoid(-static_cast<double>(dot<Real>(output.row(n), hidden)));
    return static_cast<Real>(loss);
}

template <typename Real>
LossGradient<Real> negative_sampling_gradient(const Matrix<Real>& input, const Matrix<Real>& output,
                                              std::span<const WordId> context, WordId target,
                                              std::span<const WordId> negatives) {
    require(!context.empty(), "negative_sampling_gradient: empty context");
    const std::size_t dim = input.cols();
    LossGradient<Real> g{Real{0}, Matrix<Real>(input.rows(), dim), Matrix<Real>(output.rows(), dim)};
    std::vector<Real> hidden(dim);
    mean_context(input, context, std::span<Real>(hidden));
    std::vector<Real> d_hidden(dim, Real{0});

    auto term = [&](WordId w, Real label) {
        auto out_row = output.row(w);
        const Real f = dot<Real>(out_row, hidden);
        // d/df of -log s(f) is s(f) - 1; of -log s(-f) is s(f).
        const Real coeff = sigmoid(f) - label;
        g.loss += static_cast<Real>(label > 0 ? -log_sigmoid(f) : -log_sigmoid(-f));
        auto d_out = g.d_output.row(w);
        for (std::size_t d = 0; d < dim; ++d) {
            d_out[d] += coeff * hidden[d];
            d_hidden[d] += coeff * out_row[d];
        }
    };
    term(target, Real{1});
    for (WordId n : negatives) term(n, Real{0});

    const Real inv = Real{1} / static_cast<Real>(context.size());
    for (WordId c : context) {
        auto d_in = g.d_input.row(c);
        for (std::size_t d = 0; d < dim; ++d) d_in[d] += inv * d_hidden[d];
    }
    return g;
}

template <typename Real>
Real apply_negative_sampling_update(Matrix<Real>& input, Matrix<Real>& output, std::span<const WordId> context,
                                    WordId target, std::span<const WordId> negatives, Real alpha,
                                    std::span<Real> hidden, std::span<Real> error) {
    const std::size_t dim = input.cols();
    mean_context(input, context, hidden);
    std::fill(error.begin(), error.end(), Real{0});
    double loss = 0.0;

    Real* h = hidden.data();
    Real* err = error.data();
    auto term = [&](WordId w, Real label) {
        Real* out_row = output.row(w).data();
        Real f{0};
#pragma omp simd reduction(+ : f)
        for (std::size_t d = 0; d < dim; ++d) f += h[d] * out_row[d];
        // One exp serves both the sigmoid and the softplus loss.
        const Real e = std::exp(-std::abs(f));
        const Real s = f >= Real{0} ? Real{1} / (Real{1} + e) : e / (Real{1} + e);
        const Real margin = label > 0 ? f : -f;
        loss += static_cast<double>(std::log1p(e) + std::max(Real{0}, -margin));
        const Real g = alpha * (label - s);
#pragma omp simd
        for (std::size_t d = 0; d < dim; ++d) {
            err[d] += g * out_row[d];
            out_row[d] += g * h[d];
        }
    };
    term(target, Real{1});
    for (WordId n : negatives) term(n, Real{0});

    for (WordId c : context) {
        auto in_row = input.row(c);
        for (std::size_t d = 0; d < dim; ++d) in_row[d] += error[d];
    }
    return static_cast<Real>(loss);
}

template float negative_sampling_loss<float>(const Matrix<float>&, const Matrix<float>&, std::span<const WordId>,
                                             WordId, std::span<const WordId>);
template double negative_sampling_loss<double>(const Matrix<double>&, const Matrix<double>&, std::span<const WordId>,
                                               WordId, std::span<const WordId>);
template LossGradient<float> negative_sampling_gradient<float>(const Matrix<float>&, const Matrix<float>&,
                                                               std::span<const WordId>, WordId,
                                                               std::span<const WordId>);
template LossGradient<double> negative_sampling_gradient<double>(const Matrix<double>&, const Matrix<double>&,
                                                                 std::span<const WordId>, WordId,
                                                                 std::span<const WordId>);
template float apply_negative_sampling_update<float>(Matrix<float>&, Matrix<float>&, std::span<const WordId>, WordId,
                                                     std::span<const WordId>, float, std::span<float>,
                                                     std::span<float>);
template double apply_negative_sampling_update<double>(Matrix<double>&, Matrix<double>&, std::span<const WordId>,
                                                       WordId, std::span<const WordId>, double, std::span<double>,
                                                       std::span<double>);

namespace {

// Reusable buffers for one training thread.
struct Workspace {
    explicit Workspace(std::size_t dim) : hidden(dim), error(dim) {}
    std::vector<float> hidden;
    std::vector<float> error;
    std::vector<WordId> negatives;
    std::vector<WordId> context;
    std::vector<WordId> kept;
};

void draw_negatives(std::uint32_t count, WordId target, const NegativeSampler& sampler, Rng& rng,
                    std::vector<WordId>& out) {
    out.clear();
    // A single-word vocabulary has nothing to contrast against.
    if (sampler.size() < 2) return;
    while (out.size() < count) {
        const WordId w = sampler.draw(rng);
        if (w != target) out.push_back(w);
    }
}

StepResult step_with(Embedding& embedding, WordId target, std::span<const WordId> context, std::uint32_t negatives,
                     double alpha, const NegativeSampler& sampler, Rng& rng, Workspace& ws) {
    if (context.empty()) return {0.0, true};
    draw_negatives(negatives, target, sampler, rng, ws.negatives);
    const float loss = apply_negative_sampling_update<float>(embedding.input, embedding.output, context, target,
                                                             ws.negatives, static_cast<float>(alpha), ws.hidden,
                                                             ws.error);
    return {loss, false};
}

}  // namespace

StepResult train_step(Embedding& embedding, WordId target, std::span<const WordId> context, const TrainConfig& config,
                      double alpha, const NegativeSampler& sampler, Rng& rng) {
    require(alpha > 0.0, "train_step: learning rate must be positive");
    require(target < embedding.size(), "train_step: target out of range");
    require(embedding.has_output, "train_step: embedding has no output vectors");
    for (WordId c : context) require(c < embedding.size(), "train_step: context id out of range");
    Workspace ws(embedding.dim());
    return step_with(embedding, target, context, config.negative, alpha, sampler, rng, ws);
}

Embedding init_embedding(std::shared_ptr<const Vocabulary> vocab, const TrainConfig& config, Rng& rng) {
    require(vocab && !vocab->empty(), "init_embedding: empty vocabulary");
    require(config.dim >= 1, "init_embedding: dim must be >= 1");
    Embedding e;
    const std::size_t rows = vocab->size();
    e.input = Matrix<float>(rows, config.dim);
    e.output = Matrix<float>(rows, config.dim, 0.0f);
    const float bound = 0.5f / static_cast<float>(config.dim);
    std::uniform_real_distribution<float> uniform(-bound, bound);
    for (auto& x : e.input.data()) x = uniform(rng);
    e.meta.beta = config.beta;
    e.meta.seed = config.seed;
    e.meta.iterations = config.iterations;
    e.meta.dim = config.dim;
    e.meta.config_fingerprint = config.fingerprint();
    e.meta.vocab_fingerprint = vocab->fingerprint();
    e.vocab = std::move(vocab);
    return e;
}

LearningRateSchedule::LearningRateSchedule(const TrainConfig& config, std::uint64_t total_positions)
    : alpha0_(config.alpha0),
      floor_(config.alpha0 * config.min_alpha_fraction),
      total_(static_cast<double>(std::max<std::uint64_t>(total_positions, 1))) {}

double LearningRateSchedule::at(std::uint64_t processed) const {
    const double progress = std::min(1.0, static_cast<double>(processed) / total_);
    return std::max(floor_, alpha0_ * (1.0 - progress));
}

TrainingTables::TrainingTables(const Vocabulary& vocab, const TrainConfig& config) : sampler(vocab) {
    keep.resize(vocab.size());
    const std::uint64_t total = vocab.total_tokens();
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        keep[i] = subsample_keep_prob(vocab.count(static_cast<WordId>(i)), total, config.subsample_t);
    }
}

TrainStats train_epoch(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                       const TrainingTables& tables, const LearningRateSchedule& schedule, Rng& rng,
                       std::uint64_t processed_before, const ProgressCallback& progress) {
    TrainStats stats;
    stats.positions = corpus.size();
    if (corpus.empty()) return stats;

    Workspace ws(embedding.dim());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ws.kept.reserve(corpus.size());
    for (WordId w : corpus) {
        const double p = tables.keep[w];
        if (p >= 1.0 || unit(rng) < p) ws.kept.push_back(w);
    }
    stats.kept = ws.kept.size();

    const std::size_t n = ws.kept.size();
    const double stride = static_cast<double>(corpus.size()) / static_cast<double>(std::max<std::size_t>(n, 1));
    double window_loss = 0.0;
    std::uint64_t window_steps = 0;
    constexpr std::uint64_t kReportEvery = 10000;

    for (std::size_t i = 0; i < n; ++i) {
        const auto position = processed_before + static_cast<std::uint64_t>(static_cast<double>(i) * stride);
        const double alpha = schedule.at(position);
        const std::size_t b = sample_window(config.beta, rng);
        const std::size_t lo = i >= b ? i - b : 0;
        const std::size_t hi = std::min(n - 1, i + b);
        const WordId target = ws.kept[i];

        ws.context.clear();
        for (std::size_t j = lo; j <= hi; ++j) {
            if (j != i) ws.context.push_back(ws.kept[j]);
        }

        auto account = [&](const StepResult& r) {
            if (r.skipped) {
                ++stats.skipped;
                return;
            }
            ++stats.steps;
            stats.total_loss += r.loss;
            window_loss += r.loss;
            ++window_steps;
        };

        if (config.context_mode == ContextMode::averaged) {
            account(step_with(embedding, target, ws.context, config.negative, alpha, tables.sampler, rng, ws));
        } else if (ws.context.empty()) {
            account({0.0, true});
        } else {
            for (std::size_t j = 0; j < ws.context.size(); ++j) {
                const WordId single = ws.context[j];
                account(step_with(embedding, target, std::span<const WordId>(&single, 1), config.negative, alpha,
                                  tables.sampler, rng, ws));
            }
        }

        if (progress && window_steps >= kReportEvery) {
            progress({position, stats.steps, alpha, window_loss / static_cast<double>(window_steps)});
            window_loss = 0.0;
            window_steps = 0;
        }
    }
    stats.final_mean_loss = stats.mean_loss();
    return stats;
}

namespace {

void accumulate(TrainStats& total, const TrainStats& part) {
    total.positions += part.positions;
    total.kept += part.kept;
    total.steps += part.steps;
    total.skipped += part.skipped;
    total.total_loss += part.total_loss;
}

}  // namespace

TrainStats train_serial(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                        const ProgressCallback& progress) {
    config.validate();
    require(!corpus.empty(), "train: empty corpus");
    require(embedding.vocab != nullptr, "train: embedding has no vocabulary");
    const TrainingTables tables(*embedding.vocab, config);
    const LearningRateSchedule schedule(config, corpus.size() * static_cast<std::uint64_t>(config.iterations));
    Rng rng(mix64(config.seed));
    TrainStats total;
    for (std::uint32_t iter = 0; iter < config.iterations; ++iter) {
        const auto pass = train_epoch(corpus, config, embedding, tables, schedule, rng, iter * corpus.size(), progress);
        accumulate(total, pass);
        total.final_mean_loss = pass.mean_loss();
    }
    return total;
}

TrainStats train(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                 const ProgressCallback& progress) {
    if (config.workers <= 1) return train_serial(corpus, config, embedding, progress);
    return train_parallel(corpus, config, embedding, progress);
}

}  // namespace scalevec
