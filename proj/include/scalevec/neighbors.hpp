#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scalevec/cbow.hpp"
#include "scalevec/sweep.hpp"

namespace scalevec {

// u.v / (|u| |v|), clamped to [-1, 1]. Throws ContractViolation on a zero
// vector.
double cosine(std::span<const float> u, std::span<const float> v);

struct Neighbor {
    WordId id = 0;
    std::string word;
    double similarity = 0.0;
};

// The n words closest to `center` by cosine of input vectors, descending,
// ties by vocabulary id. n is clamped to V-1. Throws std::out_of_range naming
// the word if it is not in the vocabulary.
std::vector<Neighbor> top_n(std::string_view center, const Embedding& embedding, std::size_t n);

// Cosine of `center` against every vocabulary row; zero rows score 0.
std::vector<double> similarities_to(WordId center, const Embedding& embedding);

struct SimilarityCurve {
    std::string center;
    std::string neighbor;
    std::vector<std::uint32_t> betas;
    // [beta][replica]; nullopt where either word is missing from that cell.
    std::vector<std::vector<std::optional<double>>> per_replica;
    std::vector<std::optional<double>> mean;    // nullopt marks a gap
    std::vector<std::optional<double>> stddev;  // sample stddev, 0 for one replica
    std::optional<std::uint32_t> peak_beta;
    std::vector<std::optional<std::uint32_t>> replica_peak_beta;
};

// Fills mean, stddev and peaks from per_replica.
void summarize_curve(SimilarityCurve& curve);

// One curve per neighbor across the source's scale grid. A neighbor absent
// from every cell is an error; partial absence leaves gaps.
std::vector<SimilarityCurve> similarity_curves(std::string_view center, const std::vector<std::string>& neighbors,
                                               const EmbeddingSource& source);

struct CrossoverEvent {
    std::string center;
    std::string first;
    std::string second;
    std::uint32_t beta_lo = 0;
    std::uint32_t beta_hi = 0;

    bool operator==(const CrossoverEvent&) const = default;
};

// For every unordered pair of curves, reports each grid interval over which
// sim(first) - sim(second) changes strict sign. A difference that is exactly
// zero at a grid point attributes the crossover to the interval ending at that
// point; touching zero and returning to the same sign is not a crossover.
// Gaps are skipped: an event then spans the surrounding defined points.
std::vector<CrossoverEvent> detect_crossovers(std::span<const SimilarityCurve> curves);

struct NeighborCatalog {
    std::string center;
    std::size_t n = 0;
    std::vector<std::uint32_t> betas;
    std::vector<std::vector<std::string>> per_scale;  // top-n at each beta
    std::vector<std::string> members;                 // union, first-seen order
};

// Per-scale lists rank words by replica-averaged cosine to `center` (with a
// single replica this is exactly top_n).
NeighborCatalog build_catalog(std::string_view center, const EmbeddingSource& source, std::size_t n);

// Catalogs for several cutoffs sharing one pass over the source.
std::vector<NeighborCatalog> build_catalogs(std::string_view center, const EmbeddingSource& source,
                                            std::span<const std::size_t> cutoffs);

struct PeakScaleHistogram {
    std::string center;
    std::vector<std::uint32_t> betas;
    std::vector<std::size_t> counts;
    std::vector<double> fractions;
    std::size_t members = 0;
};

// Bins each peak at its beta and normalises by the number of peaks.
PeakScaleHistogram bin_peaks(std::string_view center, std::span<const std::uint32_t> betas,
                             std::span<const std::uint32_t> peaks);

// Peaks of the replica-averaged similarity curve of every catalog member.
PeakScaleHistogram peak_histogram(const NeighborCatalog& catalog, const EmbeddingSource& source);

// center, neighbor, beta, mean_sim, stddev
void write_curves_tsv(std::span<const SimilarityCurve> curves, std::ostream& out, bool header = true);
// center, word1, word2, beta_lo, beta_hi
void write_crossovers_tsv(std::span<const CrossoverEvent> events, std::ostream& out, bool header = true);
// center, beta, fraction, count
void write_histogram_tsv(const PeakScaleHistogram& histogram, std::ostream& out, bool header = true);
// center, n, beta, rank, neighbor
void write_catalog_tsv(const NeighborCatalog& catalog, std::ostream& out, bool header = true);

}  // namespace scalevec
