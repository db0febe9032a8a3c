// scalevec: corpus preparation, CBOW training across window scales, and
// scale analysis of the resulting embeddings.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "scalevec/analogy.hpp"
#include "scalevec/config.hpp"
#include "scalevec/corpus.hpp"
#include "scalevec/manifest.hpp"
#include "scalevec/neighbors.hpp"
#include "scalevec/sweep.hpp"

namespace fs = std::filesystem;
using namespace scalevec;

namespace {

constexpr const char* kOutputRootEnv = "SCALEVEC_OUTPUT_ROOT";

fs::path resolve_output(const std::string& given, const std::string& fallback_name) {
    if (!given.empty()) return given;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / fallback_name;
    throw ConfigError("no output path given (use -o or set " + std::string(kOutputRootEnv) + ")");
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != part.size() || part.empty() || v == 0) throw ConfigError("malformed list '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

// Flags that override configuration-file values.
struct ConfigOverrides {
    std::string config_file;
    std::optional<std::uint32_t> dim, beta, negative, iterations, workers;
    std::optional<double> subsample_t, alpha0, min_alpha_fraction;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> context_mode;

    void attach(CLI::App& cmd) {
        cmd.add_option("-c,--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
        cmd.add_option("--dim", dim, "embedding dimension");
        cmd.add_option("--beta", beta, "maximal window half-width");
        cmd.add_option("--negative", negative, "negative samples per update");
        cmd.add_option("--iterations", iterations, "passes over the corpus");
        cmd.add_option("--workers", workers, "training threads (1 = deterministic)");
        cmd.add_option("--subsample-t", subsample_t, "subsampling threshold (inf disables)");
        cmd.add_option("--alpha0", alpha0, "initial learning rate");
        cmd.add_option("--min-alpha-fraction", min_alpha_fraction, "final learning rate as a fraction of alpha0");
        cmd.add_option("--seed", seed, "random seed");
        cmd.add_option("--context-mode", context_mode, "averaged | pairwise");
    }

    TrainConfig resolve() const {
        TrainConfig c;
        if (!config_file.empty()) c = load_config(config_file, c);
        if (dim) c.dim = *dim;
        if (beta) c.beta = *beta;
        if (negative) c.negative = *negative;
        if (iterations) c.iterations = *iterations;
        if (workers) c.workers = *workers;
        if (subsample_t) c.subsample_t = *subsample_t;
        if (alpha0) c.alpha0 = *alpha0;
        if (min_alpha_fraction) c.min_alpha_fraction = *min_alpha_fraction;
        if (seed) c.seed = *seed;
        if (context_mode) c.context_mode = parse_context_mode(*context_mode);
        return c;
    }
};

struct LoadedCorpus {
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<WordId> ids;
    std::uint64_t fingerprint = 0;
};

LoadedCorpus load_corpus_dir(const fs::path& dir) {
    LoadedCorpus c;
    c.vocab = std::make_shared<const Vocabulary>(load_vocab(dir / "vocab.tsv"));
    c.ids = load_tokens(dir / "tokens.bin");
    for (WordId id : c.ids) {
        if (id >= c.vocab->size()) throw IntegrityError("token id outside vocabulary in " + (dir / "tokens.bin").string());
    }
    if (c.ids.empty()) throw EmptyCorpusError();
    c.fingerprint = corpus_fingerprint(c.ids);
    return c;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    body(out);
    if (!out) throw IoError("failed writing " + path.string());
}

bool has_native_magic(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string magic(kEmbeddingMagic.size(), '\0');
    return in.read(magic.data(), static_cast<std::streamsize>(magic.size())) && magic == kEmbeddingMagic;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scalevec: CBOW embeddings across context-window scales"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    std::vector<std::string> arguments(argv, argv + argc);

    // preprocess
    std::vector<std::string> pre_inputs;
    std::string pre_out;
    std::uint64_t pre_min_count = 5;
    std::uint64_t pre_max_bytes = 0;
    auto* pre = app.add_subcommand("preprocess", "clean text, build vocabulary and token stream");
    pre->add_option("inputs", pre_inputs, "plain-text input files")->required()->check(CLI::ExistingFile);
    pre->add_option("-o,--out", pre_out, "output directory");
    pre->add_option("--min-count", pre_min_count, "drop words seen fewer times")->check(CLI::PositiveNumber);
    pre->add_option("--max-bytes", pre_max_bytes, "read at most this many input bytes (0 = all)");

    // train
    ConfigOverrides train_cfg;
    std::string train_corpus, train_out;
    bool train_no_output = false;
    auto* trn = app.add_subcommand("train", "train one embedding");
    train_cfg.attach(*trn);
    trn->add_option("--corpus", train_corpus, "directory written by preprocess")->required()->check(CLI::ExistingDirectory);
    trn->add_option("-o,--out", train_out, "embedding file to write");
    trn->add_flag("--no-output-vectors", train_no_output, "store input vectors only");

    // sweep
    ConfigOverrides sweep_cfg;
    std::string sweep_corpus, sweep_out, sweep_scales;
    std::uint32_t sweep_replicas = 1;
    bool sweep_parallel = false;
    auto* swp = app.add_subcommand("sweep", "train embeddings across a grid of scales");
    sweep_cfg.attach(*swp);
    swp->add_option("--corpus", sweep_corpus, "directory written by preprocess")->required()->check(CLI::ExistingDirectory);
    swp->add_option("--scales", sweep_scales, "e.g. 1..100 or 1,2,5")->required();
    swp->add_option("--replicas", sweep_replicas, "embeddings per scale")->check(CLI::PositiveNumber);
    swp->add_option("-o,--out", sweep_out, "sweep directory");
    swp->add_flag("--parallel-cells", sweep_parallel, "train cells concurrently");

    // eval-analogy
    std::string ana_sweep, ana_questions, ana_out;
    std::size_t ana_restrict = kDefaultRestrictK;
    auto* ana = app.add_subcommand("eval-analogy", "analogy accuracy per relation across scales");
    ana->add_option("--sweep", ana_sweep, "sweep directory")->required()->check(CLI::ExistingDirectory);
    ana->add_option("--questions", ana_questions, "questions-words style task file")->required();
    ana->add_option("--restrict-k", ana_restrict, "search among this many most frequent words")
        ->check(CLI::PositiveNumber);
    ana->add_option("-o,--out", ana_out, "output directory");

    // neighbors
    std::string nb_sweep, nb_centers, nb_nlist = "5,10,20,50,100", nb_track, nb_out;
    std::size_t nb_curve_n = 10;
    auto* nbr = app.add_subcommand("neighbors", "similarity curves, crossovers, catalogs and peak-scale histograms");
    nbr->add_option("--sweep", nb_sweep, "sweep directory")->required()->check(CLI::ExistingDirectory);
    nbr->add_option("--center", nb_centers, "comma-separated center words")->required();
    nbr->add_option("--n-list", nb_nlist, "catalog cutoffs, comma-separated");
    nbr->add_option("--track", nb_track, "comma-separated neighbors for curves (default: catalog at --curve-n)");
    nbr->add_option("--curve-n", nb_curve_n, "catalog cutoff used for curves when --track is absent")
        ->check(CLI::PositiveNumber);
    nbr->add_option("-o,--out", nb_out, "output directory");

    // export
    std::string ex_in, ex_out, ex_to = "reference";
    auto* exp = app.add_subcommand("export", "convert between native and reference embedding formats");
    exp->add_option("input", ex_in, "embedding file")->required()->check(CLI::ExistingFile);
    exp->add_option("output", ex_out, "destination file")->required();
    exp->add_option("--to", ex_to, "reference | native")->check(CLI::IsMember({"reference", "native"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*pre) {
            const fs::path out = resolve_output(pre_out, "corpus");
            fs::create_directories(out);
            std::vector<fs::path> inputs(pre_inputs.begin(), pre_inputs.end());
            const auto prepared = prepare_corpus(inputs, pre_min_count, pre_max_bytes);
            save_vocab(prepared.vocab, out / "vocab.tsv");
            save_tokens(prepared.ids, out / "tokens.bin");
            std::cout << "tokens\t" << prepared.stats.raw_tokens << '\n'
                      << "distinct\t" << prepared.vocab.size() << '\n'
                      << "kept_tokens\t" << prepared.stats.kept_tokens << '\n'
                      << "invalid_bytes\t" << prepared.stats.invalid_bytes << '\n';
            auto manifest = RunManifest::open(out);
            manifest.record("preprocess",
                            {{"min_count", pre_min_count},
                             {"max_bytes", pre_max_bytes},
                             {"inputs", pre_inputs},
                             {"raw_tokens", prepared.stats.raw_tokens},
                             {"distinct", prepared.vocab.size()}},
                            corpus_fingerprint(prepared.ids), {out / "vocab.tsv", out / "tokens.bin"}, arguments);
            manifest.save();
        } else if (*trn) {
            TrainConfig config = train_cfg.resolve();
            config.validate();
            const auto corpus = load_corpus_dir(train_corpus);
            const fs::path out = resolve_output(train_out, "embedding_beta" + std::to_string(config.beta) + ".stv");
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            Rng rng(config.seed);
            Embedding e = init_embedding(corpus.vocab, config, rng);
            e.meta.corpus_fingerprint = corpus.fingerprint;
            const auto stats = train(corpus.ids, config, e, [](const TrainProgress& p) {
                std::cerr << "\rposition " << p.positions << "  alpha " << p.alpha << "  loss " << p.mean_loss
                          << "    " << std::flush;
            });
            std::cerr << '\n';
            save_embedding(e, out, !train_no_output);
            std::cout << "steps\t" << stats.steps << "\nmean_loss\t" << stats.mean_loss() << "\nfinal_loss\t"
                      << stats.final_mean_loss << '\n';
            auto manifest = RunManifest::open(out.has_parent_path() ? out.parent_path() : fs::path("."));
            manifest.record("train", to_json(config), corpus.fingerprint, {out}, arguments);
            manifest.save();
        } else if (*swp) {
            SweepPlan plan;
            plan.base_config = sweep_cfg.resolve();
            plan.scales = parse_scales(sweep_scales);
            plan.replicas = sweep_replicas;
            plan.out_dir = resolve_output(sweep_out, "sweep");
            plan.parallel_cells = sweep_parallel;
            plan.validate();
            const auto corpus = load_corpus_dir(sweep_corpus);
            const auto result = run_sweep(plan, corpus.ids, corpus.vocab);
            std::size_t failed = 0;
            for (const auto& cell : result.cells) {
                std::cout << "beta " << cell.beta << " replica " << cell.replica << '\t' << to_string(cell.status);
                if (!cell.error.empty()) std::cout << '\t' << cell.error;
                std::cout << '\n';
                failed += cell.status == CellStatus::failed;
            }
            std::cout << "cells\t" << result.cells.size() << "\nfailed\t" << failed << '\n';
            auto manifest = RunManifest::open(plan.out_dir);
            auto config_json = to_json(plan.base_config);
            config_json["scales"] = sweep_scales;
            config_json["replicas"] = sweep_replicas;
            manifest.record("sweep", config_json, corpus.fingerprint, {plan.out_dir / "manifest.json"}, arguments);
            manifest.save();
            if (failed > 0) return 1;
        } else if (*ana) {
            if (!fs::exists(ana_questions)) throw IoError("questions file not found: " + ana_questions);
            const auto suite = load_questions(ana_questions);
            SweepSource source(load_manifest(fs::path(ana_sweep) / "manifest.json"));
            const fs::path out = resolve_output(ana_out, "analogy");
            fs::create_directories(out);
            const auto report = accuracy_curves(source, suite, ana_restrict);
            write_file(out / "analogy_accuracy.tsv", [&](std::ostream& o) { write_accuracy_tsv(report, o); });
            write_file(out / "analogy_peaks.tsv", [&](std::ostream& o) { write_peak_summary_tsv(report, o); });
            write_file(out / "analogy_summary.json", [&](std::ostream& o) { write_accuracy_json(report, o); });
            std::cout << "relations\t" << suite.relations.size() << "\nquestions\t" << suite.question_count()
                      << "\nmalformed_lines\t" << suite.malformed_lines << '\n';
            auto manifest = RunManifest::open(out);
            manifest.record("eval-analogy",
                            {{"sweep", fs::absolute(ana_sweep).string()},
                             {"questions", fs::absolute(ana_questions).string()},
                             {"restrict_k", ana_restrict}},
                            0,
                            {out / "analogy_accuracy.tsv", out / "analogy_peaks.tsv", out / "analogy_summary.json"},
                            arguments);
            manifest.save();
        } else if (*nbr) {
            const auto cutoffs = parse_size_list(nb_nlist);
            const auto centers = split_words(nb_centers);
            if (centers.empty()) throw ConfigError("no center words given");
            SweepSource source(load_manifest(fs::path(nb_sweep) / "manifest.json"));
            const fs::path out = resolve_output(nb_out, "neighbors");
            fs::create_directories(out);

            std::ofstream curves_out(out / "curves.tsv"), cross_out(out / "crossovers.tsv");
            write_curves_tsv({}, curves_out);
            write_crossovers_tsv({}, cross_out);
            std::vector<fs::path> outputs = {out / "curves.tsv", out / "crossovers.tsv"};
            std::vector<std::size_t> all_cutoffs = cutoffs;
            if (nb_track.empty()) all_cutoffs.push_back(nb_curve_n);

            for (std::size_t ci = 0; ci < centers.size(); ++ci) {
                const auto& center = centers[ci];
                const auto catalogs = build_catalogs(center, source, all_cutoffs);
                for (std::size_t k = 0; k < cutoffs.size(); ++k) {
                    const auto& catalog = catalogs[k];
                    const auto hist = peak_histogram(catalog, source);
                    const auto suffix = "_n" + std::to_string(catalog.n) + ".tsv";
                    const fs::path cat_path = out / ("catalog_" + center + suffix);
                    const fs::path hist_path = out / ("histogram_" + center + suffix);
                    write_file(cat_path, [&](std::ostream& o) { write_catalog_tsv(catalog, o); });
                    write_file(hist_path, [&](std::ostream& o) { write_histogram_tsv(hist, o); });
                    outputs.push_back(cat_path);
                    outputs.push_back(hist_path);
                    std::cout << center << "\tN=" << catalog.n << "\tcatalog_size=" << catalog.members.size() << '\n';
                }
                const auto tracked = nb_track.empty() ? catalogs.back().members : split_words(nb_track);
                const auto curves = similarity_curves(center, tracked, source);
                write_curves_tsv(curves, curves_out, false);
                write_crossovers_tsv(detect_crossovers(curves), cross_out, false);
            }
            if (!curves_out || !cross_out) throw IoError("failed writing neighbor outputs in " + out.string());
            auto manifest = RunManifest::open(out);
            manifest.record("neighbors",
                            {{"sweep", fs::absolute(nb_sweep).string()},
                             {"centers", centers},
                             {"n_list", cutoffs},
                             {"track", nb_track},
                             {"curve_n", nb_curve_n}},
                            0, outputs, arguments);
            manifest.save();
        } else if (*exp) {
            const Embedding e = has_native_magic(ex_in) ? load_embedding(ex_in) : import_reference(ex_in);
            if (ex_to == "reference") {
                export_reference(e, ex_out);
            } else {
                save_embedding(e, ex_out);
            }
            std::cout << "wrote\t" << ex_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
