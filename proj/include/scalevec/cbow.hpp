#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scalevec/common.hpp"
#include "scalevec/corpus.hpp"

namespace scalevec {

using Rng = std::mt19937_64;

enum class ContextMode { averaged, pairwise };

std::string to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view text);

// Hyperparameters of one training run. Defaults follow the published runs:
// 200 dimensions, 25 negatives, subsampling threshold 1e-4, 30 iterations,
// 16 threads. beta has no default and must be set explicitly.
struct TrainConfig {
    std::uint32_t dim = 200;
    std::uint32_t beta = 0;
    std::uint32_t negative = 25;
    double subsample_t = 1e-4;  // +inf disables subsampling
    std::uint32_t iterations = 30;
    std::uint32_t workers = 16;
    double alpha0 = 0.05;
    double min_alpha_fraction = 1e-4;
    std::uint64_t seed = 1;
    ContextMode context_mode = ContextMode::averaged;

    // Throws ConfigError naming the offending field.
    void validate() const;

    // Hash of every field except beta, seed and workers: identical across the
    // cells of one sweep.
    std::uint64_t fingerprint() const;

    bool operator==(const TrainConfig&) const = default;
};

struct EmbeddingMeta {
    bool known = true;  // false for files imported without provenance
    std::uint32_t beta = 0;
    std::uint64_t seed = 0;
    std::uint32_t iterations = 0;
    std::uint32_t dim = 0;
    std::uint64_t corpus_fingerprint = 0;
    std::uint64_t config_fingerprint = 0;
    std::uint64_t vocab_fingerprint = 0;

    bool operator==(const EmbeddingMeta&) const = default;
};

// Input vectors (the published embedding) and output vectors, one row per
// vocabulary id.
struct Embedding {
    std::shared_ptr<const Vocabulary> vocab;
    Matrix<float> input;
    Matrix<float> output;
    bool has_output = true;
    EmbeddingMeta meta;

    std::size_t size() const { return input.rows(); }
    std::size_t dim() const { return input.cols(); }

    // Shape agreement and finiteness; throws IntegrityError.
    void validate() const;
};

// Draws word ids with probability proportional to count^power.
class NegativeSampler {
public:
    explicit NegativeSampler(const Vocabulary& vocab, double power = 0.75);

    WordId draw(Rng& rng) const;
    double probability(WordId id) const;
    std::size_t size() const { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

// Probability that offset k lies inside a window whose half-width is uniform
// on {1..beta}: max(0, 1 - (k-1)/beta).
double window_inclusion_prob(std::uint32_t k, std::uint32_t beta);

// Half-width drawn uniformly from {1..beta}.
std::uint32_t sample_window(std::uint32_t beta, Rng& rng);

// u_k = v'_k . h
float score(const Embedding& embedding, std::span<const float> hidden, WordId k);

// Numerically stable softmax with max subtraction; throws on non-finite input.
std::vector<double> softmax(std::span<const double> scores);

// Full-softmax posterior over the vocabulary. Diagnostics only; training
// uses negative sampling.
std::vector<double> softmax_posterior(const Embedding& embedding, std::span<const float> hidden);

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// Negative-sampling loss for one (context, target) sample:
//   -log s(v'_t . h) - sum_j log s(-v'_j . h),  h = mean of context inputs.
template <typename Real>
Real negative_sampling_loss(const Matrix<Real>& input, const Matrix<Real>& output, std::span<const WordId> context,
                            WordId target, std::span<const WordId> negatives);

template <typename Real>
struct LossGradient {
    Real loss{};
    Matrix<Real> d_input;
    Matrix<Real> d_output;
};

// Exact gradient of negative_sampling_loss.
template <typename Real>
LossGradient<Real> negative_sampling_gradient(const Matrix<Real>& input, const Matrix<Real>& output,
                                              std::span<const WordId> context, WordId target,
                                              std::span<const WordId> negatives);

// One SGD update for a (context, target) sample with given negatives.
// Output rows move by -alpha * dL/dv'. Every context row receives the full
// hidden-layer error -alpha * dL/dh, as the reference CBOW does, i.e. the
// input-row step is |context| times its exact gradient step. Returns the loss
// evaluated before the update. `hidden` and `error` are N-sized scratch.
template <typename Real>
Real apply_negative_sampling_update(Matrix<Real>& input, Matrix<Real>& output, std::span<const WordId> context,
                                    WordId target, std::span<const WordId> negatives, Real alpha,
                                    std::span<Real> hidden, std::span<Real> error);

struct StepResult {
    double loss = 0.0;
    bool skipped = false;
};

// Draws config.negative negatives (redrawing any equal to the target) and
// applies one update. An empty context is a counted no-op.
StepResult train_step(Embedding& embedding, WordId target, std::span<const WordId> context, const TrainConfig& config,
                      double alpha, const NegativeSampler& sampler, Rng& rng);

// Inputs uniform on [-0.5/N, 0.5/N], outputs zero.
Embedding init_embedding(std::shared_ptr<const Vocabulary> vocab, const TrainConfig& config, Rng& rng);

// Linear decay from alpha0 to alpha0 * min_alpha_fraction over all positions
// of all iterations.
class LearningRateSchedule {
public:
    LearningRateSchedule(const TrainConfig& config, std::uint64_t total_positions);
    double at(std::uint64_t processed) const;

private:
    double alpha0_;
    double floor_;
    double total_;
};

struct TrainProgress {
    std::uint64_t positions = 0;  // corpus positions consumed so far
    std::uint64_t steps = 0;      // updates applied
    double alpha = 0.0;
    double mean_loss = 0.0;  // since the previous report
};

using ProgressCallback = std::function<void(const TrainProgress&)>;

struct TrainStats {
    std::uint64_t positions = 0;
    std::uint64_t kept = 0;
    std::uint64_t steps = 0;
    std::uint64_t skipped = 0;
    double total_loss = 0.0;
    double final_mean_loss = 0.0;  // mean loss over the last iteration

    double mean_loss() const { return steps ? total_loss / static_cast<double>(steps) : 0.0; }
};

// Per-word subsampling keep probabilities and the negative sampler.
struct TrainingTables {
    TrainingTables(const Vocabulary& vocab, const TrainConfig& config);

    std::vector<double> keep;
    NegativeSampler sampler;
};

// One pass over corpus[begin, end): subsample, draw a half-width per
// surviving position, clip the window to the range, and update. `processed`
// is the global position counter driving the learning-rate schedule.
TrainStats train_epoch(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                       const TrainingTables& tables, const LearningRateSchedule& schedule, Rng& rng,
                       std::uint64_t processed_before = 0, const ProgressCallback& progress = {});

// Serial reference trainer: one RNG stream, every iteration in corpus order.
// Bit-reproducible for a fixed seed.
TrainStats train_serial(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                        const ProgressCallback& progress = {});

// Asynchronous shared-state trainer: config.workers OpenMP threads each own a
// contiguous shard and update both matrices without locking. Nondeterministic.
TrainStats train_parallel(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                          const ProgressCallback& progress = {});

// Dispatches on config.workers: 1 -> train_serial, otherwise train_parallel.
TrainStats train(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                 const ProgressCallback& progress = {});

}  // namespace scalevec
