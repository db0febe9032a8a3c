#include <omp.h>

#include "scalevec/cbow.hpp"

namespace scalevec {

TrainStats train_parallel(std::span<const WordId> corpus, const TrainConfig& config, Embedding& embedding,
                          const ProgressCallback& progress) {
    config.validate();
    require(!corpus.empty(), "train: empty corpus");
    require(embedding.vocab != nullptr, "train: embedding has no vocabulary");
    const TrainingTables tables(*embedding.vocab, config);
    const int workers = static_cast<int>(std::min<std::size_t>(config.workers, corpus.size()));

    std::vector<TrainStats> per_worker(static_cast<std::size_t>(workers));

    // Shared matrices are read and written by every thread without locks.
#pragma omp parallel num_threads(workers)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t count = static_cast<std::size_t>(omp_get_num_threads());
        const std::size_t begin = corpus.size() * tid / count;
        const std::size_t end = corpus.size() * (tid + 1) / count;
        const auto shard = corpus.subspan(begin, end - begin);
        // Each thread decays its rate over its own share of the positions.
        const LearningRateSchedule schedule(config, shard.size() * static_cast<std::uint64_t>(config.iterations));
        Rng rng(mix64(mix64(config.seed) + tid + 1));
        const ProgressCallback report = tid == 0 ? progress : ProgressCallback{};

        TrainStats& mine = per_worker[tid];
        for (std::uint32_t iter = 0; iter < config.iterations; ++iter) {
            const auto pass = train_epoch(shard, config, embedding, tables, schedule, rng, iter * shard.size(), report);
            mine.positions += pass.positions;
            mine.kept += pass.kept;
            mine.steps += pass.steps;
            mine.skipped += pass.skipped;
            mine.total_loss += pass.total_loss;
            mine.final_mean_loss = pass.mean_loss();
        }
    }

    TrainStats total;
    double last_loss = 0.0;
    for (const auto& s : per_worker) {
        total.positions += s.positions;
        total.kept += s.kept;
        total.steps += s.steps;
        total.skipped += s.skipped;
        total.total_loss += s.total_loss;
        last_loss += s.final_mean_loss;
    }
    total.final_mean_loss = last_loss / static_cast<double>(per_worker.size());
    return total;
}

}  // namespace scalevec
