#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scalevec/cbow.hpp"

namespace scalevec {

// ---------------------------------------------------------------------------
// Persistence
//
// Native format (all integers little-endian):
//   "STVEMB01"            8-byte magic
//   u8  version            currently 1
//   u8  flags              bit0: output matrix present, bit1: metadata known
//   u32 beta, u64 seed, u32 iterations, u32 dim
//   u64 corpus fingerprint, u64 config fingerprint, u64 vocab fingerprint
//   u64 V
//   V x { u32 length, bytes, u64 count }
//   V*dim f32 input matrix (row-major), optional V*dim f32 output matrix
//   u64 FNV-1a checksum of every preceding byte
//
// Reference format: "V N\n", then per word "word " + N f32 + "\n".
// ---------------------------------------------------------------------------

inline constexpr std::string_view kEmbeddingMagic = "STVEMB01";
inline constexpr std::uint8_t kEmbeddingVersion = 1;

void save_embedding(const Embedding& embedding, const std::filesystem::path& path, bool include_output = true);

// Validates checksum, sizes and Embedding invariants; throws IntegrityError.
Embedding load_embedding(const std::filesystem::path& path);

void export_reference(const Embedding& embedding, const std::filesystem::path& path);

// Counts are unknown in the reference format and load as 1; meta.known is
// false.
Embedding import_reference(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepPlan {
    std::vector<std::uint32_t> scales;
    std::uint32_t replicas = 1;
    TrainConfig base_config;
    std::filesystem::path out_dir;
    bool parallel_cells = false;

    // Throws ConfigError.
    void validate() const;
};

// Parses "1..100", "5", "1,2,5" or mixtures such as "1..3,10,20".
std::vector<std::uint32_t> parse_scales(std::string_view spec);

// Stable and injective in (beta, replica) for a fixed base seed.
std::uint64_t cell_seed(std::uint64_t base_seed, std::uint32_t beta, std::uint32_t replica);

enum class CellStatus { done, reused, failed };

std::string to_string(CellStatus status);

struct SweepCell {
    std::uint32_t beta = 0;
    std::uint32_t replica = 0;
    std::uint64_t seed = 0;
    std::filesystem::path path;
    CellStatus status = CellStatus::done;
    double wall_seconds = 0.0;
    double final_loss = 0.0;
    std::string error;
};

struct SweepResult {
    std::vector<std::uint32_t> scales;
    std::uint32_t replicas = 0;
    std::uint64_t config_fingerprint = 0;
    std::vector<SweepCell> cells;  // scale-major, replica-minor

    const SweepCell* find(std::uint32_t beta, std::uint32_t replica) const;
};

std::filesystem::path cell_path(const std::filesystem::path& out_dir, std::uint32_t beta, std::uint32_t replica);

// Trains every (beta, replica) cell not already present on disk with matching
// provenance. Each finished cell is persisted immediately and recorded in
// `manifest.json` under plan.out_dir. A failing cell is recorded and the
// sweep continues.
SweepResult run_sweep(const SweepPlan& plan, std::span<const WordId> corpus,
                      std::shared_ptr<const Vocabulary> vocab);

void save_manifest(const SweepResult& result, const SweepPlan& plan, std::uint64_t corpus_fp,
                   const std::filesystem::path& path);
SweepResult load_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Read access to a family of embeddings indexed by (beta, replica).
// ---------------------------------------------------------------------------

class EmbeddingSource {
public:
    virtual ~EmbeddingSource() = default;
    virtual const std::vector<std::uint32_t>& scales() const = 0;
    virtual std::uint32_t replicas() const = 0;
    // nullptr when the cell is missing or failed.
    virtual std::shared_ptr<const Embedding> get(std::uint32_t beta, std::uint32_t replica) const = 0;
};

class InMemorySource : public EmbeddingSource {
public:
    InMemorySource(std::vector<std::uint32_t> scales, std::uint32_t replicas);

    void put(std::uint32_t beta, std::uint32_t replica, std::shared_ptr<const Embedding> embedding);

    const std::vector<std::uint32_t>& scales() const override { return scales_; }
    std::uint32_t replicas() const override { return replicas_; }
    std::shared_ptr<const Embedding> get(std::uint32_t beta, std::uint32_t replica) const override;

private:
    std::size_t slot(std::uint32_t beta, std::uint32_t replica) const;

    std::vector<std::uint32_t> scales_;
    std::uint32_t replicas_;
    std::vector<std::shared_ptr<const Embedding>> cells_;
};

// Loads cells from disk on each access; nothing is cached.
class SweepSource : public EmbeddingSource {
public:
    explicit SweepSource(SweepResult result);

    const std::vector<std::uint32_t>& scales() const override { return result_.scales; }
    std::uint32_t replicas() const override { return result_.replicas; }
    std::shared_ptr<const Embedding> get(std::uint32_t beta, std::uint32_t replica) const override;

    const SweepResult& result() const { return result_; }

private:
    SweepResult result_;
};

}  // namespace scalevec
