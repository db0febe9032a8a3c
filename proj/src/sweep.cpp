#include "scalevec/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <mutex>

#include "json.hpp"
#include "scalevec/config.hpp"

namespace scalevec {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kFlagOutput = 1;
constexpr std::uint8_t kFlagMetaKnown = 2;

class HashingWriter {
public:
    explicit HashingWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path.string());
    }

    void bytes(const void* data, std::size_t size) {
        hash_.update(std::span(static_cast<const std::byte*>(data), size));
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    }
    template <typename T>
    void value(T v) {
        bytes(&v, sizeof v);
    }

    void finish() {
        const std::uint64_t digest = hash_.digest();
        out_.write(reinterpret_cast<const char*>(&digest), sizeof digest);
        out_.close();
        if (!out_) throw IoError("failed writing: " + path_.string());
    }

private:
    fs::path path_;
    std::ofstream out_;
    Fnv1a hash_;
};

class HashingReader {
public:
    explicit HashingReader(const fs::path& path) : path_(path), in_(path, std::ios::binary | std::ios::ate) {
        if (!in_) throw IoError("cannot open embedding file: " + path.string());
        size_ = static_cast<std::uint64_t>(in_.tellg());
        in_.seekg(0);
    }

    void bytes(void* data, std::size_t size) {
        if (consumed_ + size + sizeof(std::uint64_t) > size_) fail("truncated");
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
        if (!in_) fail("truncated");
        consumed_ += size;
        hash_.update(std::span(static_cast<const std::byte*>(data), size));
    }
    template <typename T>
    T value() {
        T v{};
        bytes(&v, sizeof v);
        return v;
    }

    std::uint64_t remaining() const { return size_ - consumed_; }

    void verify_trailer() {
        if (remaining() != sizeof(std::uint64_t)) fail("unexpected trailing bytes");
        std::uint64_t stored = 0;
        in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
        if (!in_ || stored != hash_.digest()) fail("checksum mismatch");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw IntegrityError("corrupt embedding file " + path_.string() + ": " + what);
    }

private:
    fs::path path_;
    std::ifstream in_;
    std::uint64_t size_ = 0;
    std::uint64_t consumed_ = 0;
    Fnv1a hash_;
};

struct Header {
    std::uint8_t flags = 0;
    EmbeddingMeta meta;
    std::uint64_t rows = 0;
};

Header read_header(HashingReader& in) {
    char magic[8];
    in.bytes(magic, sizeof magic);
    if (std::string_view(magic, 8) != kEmbeddingMagic) in.fail("bad magic");
    const auto version = in.value<std::uint8_t>();
    if (version != kEmbeddingVersion) in.fail("unsupported version " + std::to_string(version));
    Header h;
    h.flags = in.value<std::uint8_t>();
    h.meta.known = (h.flags & kFlagMetaKnown) != 0;
    h.meta.beta = in.value<std::uint32_t>();
    h.meta.seed = in.value<std::uint64_t>();
    h.meta.iterations = in.value<std::uint32_t>();
    h.meta.dim = in.value<std::uint32_t>();
    h.meta.corpus_fingerprint = in.value<std::uint64_t>();
    h.meta.config_fingerprint = in.value<std::uint64_t>();
    h.meta.vocab_fingerprint = in.value<std::uint64_t>();
    h.rows = in.value<std::uint64_t>();
    if (h.meta.dim == 0) in.fail("zero dimension");
    return h;
}

void read_matrix(HashingReader& in, Matrix<float>& m) {
    const std::uint64_t need = static_cast<std::uint64_t>(m.rows()) * m.cols() * sizeof(float);
    if (need + sizeof(std::uint64_t) > in.remaining()) in.fail("matrix data truncated");
    in.bytes(m.data().data(), m.data().size_bytes());
}

}  // namespace

void save_embedding(const Embedding& embedding, const fs::path& path, bool include_output) {
    embedding.validate();
    const bool with_output = include_output && embedding.has_output;
    HashingWriter out(path);
    out.bytes(kEmbeddingMagic.data(), kEmbeddingMagic.size());
    out.value<std::uint8_t>(kEmbeddingVersion);
    std::uint8_t flags = 0;
    if (with_output) flags |= kFlagOutput;
    if (embedding.meta.known) flags |= kFlagMetaKnown;
    out.value(flags);
    const auto& m = embedding.meta;
    out.value<std::uint32_t>(m.beta);
    out.value<std::uint64_t>(m.seed);
    out.value<std::uint32_t>(m.iterations);
    out.value<std::uint32_t>(static_cast<std::uint32_t>(embedding.dim()));
    out.value<std::uint64_t>(m.corpus_fingerprint);
    out.value<std::uint64_t>(m.config_fingerprint);
    out.value<std::uint64_t>(m.vocab_fingerprint);
    const auto& vocab = *embedding.vocab;
    out.value<std::uint64_t>(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const auto& w = vocab.word(static_cast<WordId>(i));
        out.value<std::uint32_t>(static_cast<std::uint32_t>(w.size()));
        out.bytes(w.data(), w.size());
        out.value<std::uint64_t>(vocab.count(static_cast<WordId>(i)));
    }
    out.bytes(embedding.input.data().data(), embedding.input.data().size_bytes());
    if (with_output) out.bytes(embedding.output.data().data(), embedding.output.data().size_bytes());
    out.finish();
}

Embedding load_embedding(const fs::path& path) {
    HashingReader in(path);
    const Header h = read_header(in);
    // Each vocabulary entry needs at least 13 bytes.
    if (h.rows > in.remaining() / 13) in.fail("vocabulary size exceeds file size");

    std::vector<std::string> words(h.rows);
    std::vector<std::uint64_t> counts(h.rows);
    for (std::uint64_t i = 0; i < h.rows; ++i) {
        const auto len = in.value<std::uint32_t>();
        if (len == 0 || len > in.remaining()) in.fail("bad word length");
        words[i].resize(len);
        in.bytes(words[i].data(), len);
        counts[i] = in.value<std::uint64_t>();
    }

    Embedding e;
    try {
        e.vocab = std::make_shared<const Vocabulary>(std::move(words), std::move(counts));
    } catch (const ContractViolation& ex) {
        in.fail(ex.what());
    }
    e.meta = h.meta;
    e.has_output = (h.flags & kFlagOutput) != 0;
    e.input = Matrix<float>(h.rows, h.meta.dim);
    read_matrix(in, e.input);
    if (e.has_output) {
        e.output = Matrix<float>(h.rows, h.meta.dim);
        read_matrix(in, e.output);
    }
    in.verify_trailer();
    if (e.meta.known && e.meta.vocab_fingerprint != e.vocab->fingerprint()) in.fail("vocabulary fingerprint mismatch");
    e.validate();
    return e;
}

void export_reference(const Embedding& embedding, const fs::path& path) {
    embedding.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << embedding.size() << ' ' << embedding.dim() << '\n';
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        out << embedding.vocab->word(static_cast<WordId>(i)) << ' ';
        const auto row = embedding.input.row(i);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size_bytes()));
        out << '\n';
    }
    if (!out) throw IoError("failed writing: " + path.string());
}

Embedding import_reference(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path.string());
    auto fail = [&](const std::string& what) -> IntegrityError {
        return IntegrityError("corrupt reference embedding " + path.string() + ": " + what);
    };
    std::string header;
    if (!std::getline(in, header)) throw fail("missing header");
    std::size_t rows = 0, dim = 0;
    {
        const char* p = header.data();
        const char* end = p + header.size();
        auto r1 = std::from_chars(p, end, rows);
        if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != ' ') throw fail("bad header");
        auto r2 = std::from_chars(r1.ptr + 1, end, dim);
        if (r2.ec != std::errc{} || r2.ptr != end || dim == 0) throw fail("bad header");
    }

    std::vector<std::string> words;
    words.reserve(rows);
    Matrix<float> input(rows, dim);
    for (std::size_t i = 0; i < rows; ++i) {
        std::string word;
        if (!std::getline(in, word, ' ') || word.empty()) throw fail("truncated at row " + std::to_string(i));
        words.push_back(std::move(word));
        auto row = input.row(i);
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size_bytes()));
        if (!in) throw fail("truncated vector at row " + std::to_string(i));
        // The trailing newline is optional in some writers.
        if (in.peek() == '\n') in.get();
    }

    Embedding e;
    try {
        e.vocab = std::make_shared<const Vocabulary>(std::move(words), std::vector<std::uint64_t>(rows, 1));
    } catch (const ContractViolation& ex) {
        throw fail(ex.what());
    }
    e.input = std::move(input);
    e.has_output = false;
    e.meta.known = false;
    e.meta.dim = static_cast<std::uint32_t>(dim);
    e.validate();
    return e;
}

// ---------------------------------------------------------------------------

void SweepPlan::validate() const {
    if (scales.empty()) throw ConfigError("sweep: no scales given");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] < 1) throw ConfigError("sweep: scales must be >= 1");
        if (i > 0 && scales[i] <= scales[i - 1]) throw ConfigError("sweep: scales must be strictly increasing");
    }
    if (replicas < 1) throw ConfigError("sweep: replicas must be >= 1");
    TrainConfig probe = base_config;
    probe.beta = scales.front();
    probe.validate();
}

std::vector<std::uint32_t> parse_scales(std::string_view spec) {
    auto bad = [&]() { return ConfigError("malformed scale spec '" + std::string(spec) + "'"); };
    auto number = [&](std::string_view text) {
        std::uint32_t v = 0;
        auto r = std::from_chars(text.data(), text.data() + text.size(), v);
        if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size()) throw bad();
        return v;
    };
    std::vector<std::uint32_t> out;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto comma = spec.find(',', start);
        auto part = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        auto dots = part.find("..");
        if (dots == std::string_view::npos) {
            out.push_back(number(part));
        } else {
            const auto lo = number(part.substr(0, dots));
            const auto hi = number(part.substr(dots + 2));
            if (lo > hi) throw bad();
            for (auto b = lo; b <= hi; ++b) out.push_back(b);
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 1 || (i > 0 && out[i] <= out[i - 1])) throw bad();
    }
    return out;
}

std::uint64_t cell_seed(std::uint64_t base_seed, std::uint32_t beta, std::uint32_t replica) {
    const std::uint64_t key = (static_cast<std::uint64_t>(beta) << 32) | replica;
    return mix64(mix64(key) + base_seed);
}

std::string to_string(CellStatus status) {
    switch (status) {
        case CellStatus::done: return "done";
        case CellStatus::reused: return "reused";
        case CellStatus::failed: return "failed";
    }
    return "unknown";
}

namespace {

CellStatus parse_status(const std::string& text) {
    if (text == "done") return CellStatus::done;
    if (text == "reused") return CellStatus::reused;
    if (text == "failed") return CellStatus::failed;
    throw IntegrityError("manifest: unknown cell status '" + text + "'");
}

}  // namespace

const SweepCell* SweepResult::find(std::uint32_t beta, std::uint32_t replica) const {
    for (const auto& c : cells) {
        if (c.beta == beta && c.replica == replica) return &c;
    }
    return nullptr;
}

fs::path cell_path(const fs::path& out_dir, std::uint32_t beta, std::uint32_t replica) {
    return out_dir / ("beta_" + std::to_string(beta)) / ("replica_" + std::to_string(replica) + ".stv");
}

void save_manifest(const SweepResult& result, const SweepPlan& plan, std::uint64_t corpus_fp, const fs::path& path) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : result.cells) {
        cells.push_back({{"beta", c.beta},
                         {"replica", c.replica},
                         {"seed", c.seed},
                         {"status", to_string(c.status)},
                         {"path", fs::relative(c.path, path.parent_path()).generic_string()},
                         {"wall_seconds", c.wall_seconds},
                         {"final_loss", c.final_loss},
                         {"error", c.error}});
    }
    nlohmann::json doc = {{"format", "scalevec-sweep-manifest"},
                          {"version", 1},
                          {"scales", result.scales},
                          {"replicas", result.replicas},
                          {"base_config", to_json(plan.base_config)},
                          {"config_fingerprint", result.config_fingerprint},
                          {"corpus_fingerprint", corpus_fp},
                          {"cells", cells}};
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write manifest: " + tmp.string());
        out << doc.dump(2) << '\n';
        if (!out) throw IoError("failed writing manifest: " + tmp.string());
    }
    fs::rename(tmp, path);
}

SweepResult load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sweep manifest: " + path.string());
    try {
        nlohmann::json doc;
        in >> doc;
        SweepResult r;
        r.scales = doc.at("scales").get<std::vector<std::uint32_t>>();
        r.replicas = doc.at("replicas").get<std::uint32_t>();
        r.config_fingerprint = doc.at("config_fingerprint").get<std::uint64_t>();
        for (const auto& c : doc.at("cells")) {
            SweepCell cell;
            cell.beta = c.at("beta").get<std::uint32_t>();
            cell.replica = c.at("replica").get<std::uint32_t>();
            cell.seed = c.at("seed").get<std::uint64_t>();
            cell.status = parse_status(c.at("status").get<std::string>());
            cell.path = path.parent_path() / c.at("path").get<std::string>();
            cell.wall_seconds = c.at("wall_seconds").get<double>();
            cell.final_loss = c.at("final_loss").get<double>();
            cell.error = c.at("error").get<std::string>();
            r.cells.push_back(std::move(cell));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("malformed sweep manifest " + path.string() + ": " + e.what());
    }
}

namespace {

// Reads only the fixed-size header; enough to decide whether a cell can be
// reused without loading its matrices.
std::optional<EmbeddingMeta> probe_header(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) return std::nullopt;
    try {
        HashingReader in(path);
        return read_header(in).meta;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void ensure_writable(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out || !(out << "ok")) throw IoError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

}  // namespace

SweepResult run_sweep(const SweepPlan& plan, std::span<const WordId> corpus, std::shared_ptr<const Vocabulary> vocab) {
    plan.validate();
    require(vocab && !vocab->empty(), "run_sweep: empty vocabulary");
    require(!corpus.empty(), "run_sweep: empty corpus");
    ensure_writable(plan.out_dir);

    const std::uint64_t corpus_fp = corpus_fingerprint(corpus);
    const std::uint64_t vocab_fp = vocab->fingerprint();
    SweepResult result;
    result.scales = plan.scales;
    result.replicas = plan.replicas;
    result.config_fingerprint = plan.base_config.fingerprint();
    for (auto beta : plan.scales) {
        for (std::uint32_t r = 0; r < plan.replicas; ++r) {
            SweepCell cell;
            cell.beta = beta;
            cell.replica = r;
            cell.seed = cell_seed(plan.base_config.seed, beta, r);
            cell.path = cell_path(plan.out_dir, beta, r);
            result.cells.push_back(cell);
        }
    }

    const fs::path manifest = plan.out_dir / "manifest.json";
    std::mutex manifest_mutex;
    auto record = [&]() {
        std::lock_guard lock(manifest_mutex);
        save_manifest(result, plan, corpus_fp, manifest);
    };

    auto run_cell = [&](SweepCell& cell) {
        TrainConfig config = plan.base_config;
        config.beta = cell.beta;
        config.seed = cell.seed;

        if (auto meta = probe_header(cell.path)) {
            if (meta->known && meta->beta == cell.beta && meta->seed == cell.seed &&
                meta->config_fingerprint == config.fingerprint() && meta->corpus_fingerprint == corpus_fp &&
                meta->vocab_fingerprint == vocab_fp) {
                cell.status = CellStatus::reused;
                return;
            }
        }
        const auto start = std::chrono::steady_clock::now();
        try {
            Rng rng(config.seed);
            Embedding e = init_embedding(vocab, config, rng);
            e.meta.corpus_fingerprint = corpus_fp;
            const TrainStats stats = train(corpus, config, e);
            fs::create_directories(cell.path.parent_path());
            const fs::path tmp = cell.path.string() + ".partial";
            save_embedding(e, tmp);
            fs::rename(tmp, cell.path);
            cell.final_loss = stats.final_mean_loss;
            cell.status = CellStatus::done;
            cell.error.clear();
        } catch (const std::exception& ex) {
            cell.status = CellStatus::failed;
            cell.error = ex.what();
        }
        cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    if (plan.parallel_cells) {
        const auto n = static_cast<std::ptrdiff_t>(result.cells.size());
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            run_cell(result.cells[static_cast<std::size_t>(i)]);
            record();
        }
    } else {
        for (auto& cell : result.cells) {
            run_cell(cell);
            record();
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

InMemorySource::InMemorySource(std::vector<std::uint32_t> scales, std::uint32_t replicas)
    : scales_(std::move(scales)), replicas_(replicas), cells_(scales_.size() * replicas) {}

std::size_t InMemorySource::slot(std::uint32_t beta, std::uint32_t replica) const {
    auto it = std::find(scales_.begin(), scales_.end(), beta);
    require(it != scales_.end(), "EmbeddingSource: unknown scale");
    require(replica < replicas_, "EmbeddingSource: replica out of range");
    return static_cast<std::size_t>(it - scales_.begin()) * replicas_ + replica;
}

void InMemorySource::put(std::uint32_t beta, std::uint32_t replica, std::shared_ptr<const Embedding> embedding) {
    cells_[slot(beta, replica)] = std::move(embedding);
}

std::shared_ptr<const Embedding> InMemorySource::get(std::uint32_t beta, std::uint32_t replica) const {
    return cells_[slot(beta, replica)];
}

SweepSource::SweepSource(SweepResult result) : result_(std::move(result)) {}

std::shared_ptr<const Embedding> SweepSource::get(std::uint32_t beta, std::uint32_t replica) const {
    const SweepCell* cell = result_.find(beta, replica);
    if (cell == nullptr || cell->status == CellStatus::failed) return nullptr;
    std::error_code ec;
    if (!fs::exists(cell->path, ec)) return nullptr;
    return std::make_shared<const Embedding>(load_embedding(cell->path));
}

}  // namespace scalevec
