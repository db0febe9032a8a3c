#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "scalevec/sweep.hpp"
#include "support/oracles.hpp"

using namespace scalevec;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("scalevec_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

struct TinyCorpus {
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<WordId> ids;
};

TinyCorpus tiny_corpus() {
    scalevec::testing::PlantedSpec spec;
    spec.target_tokens = 3000;
    spec.fillers = 30;
    spec.adjacent_pairs = 3;
    spec.distant_pairs = 3;
    spec.lag = 3;
    const auto planted = scalevec::testing::make_planted_corpus(spec);
    TinyCorpus c;
    c.vocab = std::make_shared<const Vocabulary>(build_vocab(planted.tokens, 1));
    c.ids = encode(planted.tokens, *c.vocab);
    return c;
}

SweepPlan tiny_plan(const fs::path& out) {
    SweepPlan plan;
    plan.scales = {1, 2, 3};
    plan.replicas = 2;
    plan.base_config.dim = 8;
    plan.base_config.negative = 2;
    plan.base_config.iterations = 1;
    plan.base_config.workers = 1;
    plan.out_dir = out;
    return plan;
}

}  // namespace

TEST_CASE("native format round-trips exactly") {
    const auto dir = temp_dir("roundtrip");
    auto e = scalevec::testing::random_embedding(40, 7, 3);
    e.meta.known = true;
    e.meta.beta = 12;
    e.meta.iterations = 4;
    e.meta.corpus_fingerprint = 99;
    e.meta.config_fingerprint = 1234;
    save_embedding(e, dir / "e.stv");
    const auto back = load_embedding(dir / "e.stv");
    CHECK(*back.vocab == *e.vocab);
    CHECK(back.input == e.input);
    CHECK(back.output == e.output);
    CHECK(back.has_output);
    CHECK(back.meta == e.meta);

    save_embedding(e, dir / "in_only.stv", false);
    const auto in_only = load_embedding(dir / "in_only.stv");
    CHECK_FALSE(in_only.has_output);
    CHECK(in_only.input == e.input);
    CHECK(fs::file_size(dir / "in_only.stv") < fs::file_size(dir / "e.stv"));
}

TEST_CASE("corrupt native files are rejected") {
    const auto dir = temp_dir("corrupt");
    const auto e = scalevec::testing::random_embedding(10, 4, 1);
    save_embedding(e, dir / "e.stv");
    const auto full = read_bytes(dir / "e.stv");

    for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{40}, full.size() / 2, full.size() - 1}) {
        std::ofstream(dir / "t.stv", std::ios::binary) << full.substr(0, keep);
        CHECK_THROWS_AS(load_embedding(dir / "t.stv"), IntegrityError);
    }
    auto flipped = full;
    flipped[full.size() / 2] ^= 0x10;
    std::ofstream(dir / "f.stv", std::ios::binary) << flipped;
    CHECK_THROWS_AS(load_embedding(dir / "f.stv"), IntegrityError);

    CHECK_THROWS_AS(load_embedding(dir / "missing.stv"), IoError);
}

TEST_CASE("reference format matches an independently written file") {
    const fs::path golden = fs::path(SCALEVEC_TEST_DATA) / "reference_two_words.bin";
    const auto imported = import_reference(golden);
    REQUIRE(imported.size() == 2);
    CHECK(imported.vocab->word(0) == "alpha");
    CHECK(imported.vocab->word(1) == "beta");
    CHECK(imported.input(0, 1) == -2.5f);
    CHECK(imported.input(1, 2) == -1.0f);
    CHECK_FALSE(imported.meta.known);
    CHECK_FALSE(imported.has_output);

    const auto dir = temp_dir("reference");
    export_reference(imported, dir / "out.bin");
    CHECK(read_bytes(dir / "out.bin") == read_bytes(golden));
    CHECK(fs::file_size(dir / "out.bin") == 41);

    std::ofstream(dir / "short.bin", std::ios::binary) << read_bytes(golden).substr(0, 30);
    CHECK_THROWS_AS(import_reference(dir / "short.bin"), IntegrityError);
}

TEST_CASE("parse_scales") {
    CHECK(parse_scales("5") == std::vector<std::uint32_t>{5});
    CHECK(parse_scales("1,2,5") == std::vector<std::uint32_t>{1, 2, 5});
    CHECK(parse_scales("1..4") == std::vector<std::uint32_t>{1, 2, 3, 4});
    CHECK(parse_scales("1..3,10,20") == std::vector<std::uint32_t>{1, 2, 3, 10, 20});
    CHECK(parse_scales("1..100").size() == 100);
    for (const char* bad : {"", "0", "3,2", "2,2", "5..1", "a", "1..", "1,,2", "-1"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_scales(bad), ConfigError);
    }
}

TEST_CASE("cell seeds are distinct across a full grid") {
    std::set<std::uint64_t> seen;
    for (std::uint32_t beta = 1; beta <= 100; ++beta)
        for (std::uint32_t r = 0; r < 10; ++r) seen.insert(cell_seed(1, beta, r));
    CHECK(seen.size() == 1000);
    CHECK(cell_seed(1, 5, 2) == cell_seed(1, 5, 2));
    CHECK(cell_seed(1, 5, 2) != cell_seed(2, 5, 2));
}

TEST_CASE("sweep trains every cell, writes a manifest and resumes") {
    const auto dir = temp_dir("sweep");
    const auto corpus = tiny_corpus();
    const auto plan = tiny_plan(dir);

    const auto first = run_sweep(plan, corpus.ids, corpus.vocab);
    REQUIRE(first.cells.size() == 6);
    for (const auto& cell : first.cells) {
        CHECK(cell.status == CellStatus::done);
        CHECK(fs::exists(cell.path));
        const auto e = load_embedding(cell.path);
        CHECK(e.meta.beta == cell.beta);
        CHECK(e.meta.seed == cell.seed);
    }
    CHECK(first.find(2, 1) != nullptr);
    CHECK(first.find(4, 0) == nullptr);

    const auto manifest = load_manifest(dir / "manifest.json");
    CHECK(manifest.cells.size() == 6);
    CHECK(manifest.scales == plan.scales);
    CHECK(manifest.replicas == 2);
    CHECK(manifest.cells[3].path == first.cells[3].path);

    // Delete one cell: only it is retrained, and to the same bytes.
    const auto victim = cell_path(dir, 2, 1);
    const auto victim_bytes = read_bytes(victim);
    const auto other = cell_path(dir, 3, 0);
    const auto other_time = fs::last_write_time(other);
    fs::remove(victim);
    const auto second = run_sweep(plan, corpus.ids, corpus.vocab);
    for (const auto& cell : second.cells) {
        CAPTURE(cell.beta);
        CAPTURE(cell.replica);
        CHECK(cell.status == (cell.path == victim ? CellStatus::done : CellStatus::reused));
    }
    CHECK(read_bytes(victim) == victim_bytes);
    CHECK(fs::last_write_time(other) == other_time);

    // A changed configuration invalidates every cell.
    auto changed = plan;
    changed.base_config.dim = 9;
    const auto third = run_sweep(changed, corpus.ids, corpus.vocab);
    for (const auto& cell : third.cells) CHECK(cell.status == CellStatus::done);

    const SweepSource source(load_manifest(dir / "manifest.json"));
    REQUIRE(source.get(3, 1) != nullptr);
    CHECK(source.get(3, 1)->dim() == 9);
}

TEST_CASE("sweep refuses an unwritable output directory before training") {
    const auto dir = temp_dir("unwritable");
    std::ofstream(dir / "file") << "x";
    const auto corpus = tiny_corpus();
    auto plan = tiny_plan(dir / "file" / "sub");
    CHECK_THROWS_AS(run_sweep(plan, corpus.ids, corpus.vocab), IoError);
}

TEST_CASE("sweep plan validation") {
    auto plan = tiny_plan("x");
    CHECK_NOTHROW(plan.validate());
    plan.replicas = 0;
    CHECK_THROWS_AS(plan.validate(), ConfigError);
    plan = tiny_plan("x");
    plan.scales = {2, 1};
    CHECK_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("in-memory source") {
    InMemorySource source({1, 5}, 2);
    auto e = std::make_shared<const Embedding>(scalevec::testing::random_embedding(3, 2, 1));
    source.put(5, 1, e);
    CHECK(source.get(5, 1) == e);
    CHECK(source.get(1, 0) == nullptr);
    CHECK_THROWS_AS(source.get(2, 0), ContractViolation);
    CHECK_THROWS_AS(source.get(5, 2), ContractViolation);
}
