// Serial reference vs OpenMP kernels: similarity scan and CBOW training.

#include <benchmark/benchmark.h>

#include "scalevec/kernels.hpp"
#include "support/oracles.hpp"
#include "support/planted_corpus.hpp"

using namespace scalevec;

namespace {

const Embedding& scan_embedding() {
    static const Embedding e = scalevec::testing::random_embedding(100'000, 200, 1);
    return e;
}

void BM_ScanSerial(benchmark::State& state) {
    const auto& e = scan_embedding();
    std::vector<float> scores(e.size());
    for (auto _ : state) {
        scan_dot_serial(e.input, e.input.row(0), scores);
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(e.size()));
}

void BM_ScanParallel(benchmark::State& state) {
    const auto& e = scan_embedding();
    std::vector<float> scores(e.size());
    for (auto _ : state) {
        scan_dot_parallel(e.input, e.input.row(0), scores);
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(e.size()));
}

struct TrainingData {
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<WordId> ids;
};

const TrainingData& training_data() {
    static const TrainingData data = [] {
        scalevec::testing::PlantedSpec spec;
        spec.target_tokens = 200'000;
        const auto planted = scalevec::testing::make_planted_corpus(spec);
        TrainingData d;
        d.vocab = std::make_shared<const Vocabulary>(build_vocab(planted.tokens, 1));
        d.ids = encode(planted.tokens, *d.vocab);
        return d;
    }();
    return data;
}

// Argument: worker count. 1 selects the serial trainer.
void BM_Train(benchmark::State& state) {
    const auto& data = training_data();
    TrainConfig config;
    config.dim = 100;
    config.beta = 5;
    config.negative = 5;
    config.iterations = 1;
    config.workers = static_cast<std::uint32_t>(state.range(0));
    for (auto _ : state) {
        state.PauseTiming();
        Rng rng(config.seed);
        Embedding e = init_embedding(data.vocab, config, rng);
        state.ResumeTiming();
        train(data.ids, config, e);
        benchmark::DoNotOptimize(e.input.data().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.ids.size()));
}

}  // namespace

BENCHMARK(BM_ScanSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Train)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
