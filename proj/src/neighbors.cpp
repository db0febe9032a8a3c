#include "scalevec/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "scalevec/kernels.hpp"
#include "scalevec/peak.hpp"

namespace scalevec {

double cosine(std::span<const float> u, std::span<const float> v) {
    require(u.size() == v.size(), "cosine: dimension mismatch");
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += static_cast<double>(u[i]) * v[i];
        uu += static_cast<double>(u[i]) * u[i];
        vv += static_cast<double>(v[i]) * v[i];
    }
    require(uu > 0.0 && vv > 0.0, "cosine: zero vector");
    return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

namespace {

WordId require_word(const Embedding& embedding, std::string_view word) {
    auto id = embedding.vocab->find(word);
    if (!id) throw std::out_of_range("word not in vocabulary: '" + std::string(word) + "'");
    return *id;
}

}  // namespace

std::vector<double> similarities_to(WordId center, const Embedding& embedding) {
    require(center < embedding.size(), "similarities_to: center out of range");
    const auto norms = row_norms(embedding.input);
    require(norms[center] > 0.0f, "similarities_to: center vector is zero");
    std::vector<float> dots(embedding.size());
    scan_dot_parallel(embedding.input, embedding.input.row(center), dots);
    std::vector<double> sims(embedding.size());
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (norms[i] == 0.0f) continue;
        const double c = static_cast<double>(dots[i]) / (static_cast<double>(norms[i]) * norms[center]);
        sims[i] = std::clamp(c, -1.0, 1.0);
    }
    return sims;
}

namespace {

// Ids other than `center` ordered by descending score, ties by id; only the
// first `n` positions are guaranteed sorted.
std::vector<WordId> rank_excluding(std::span<const double> scores, WordId center, std::size_t n) {
    std::vector<WordId> ids;
    ids.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != center) ids.push_back(static_cast<WordId>(i));
    }
    n = std::min(n, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), [&](WordId a, WordId b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    ids.resize(n);
    return ids;
}

}  // namespace

std::vector<Neighbor> top_n(std::string_view center, const Embedding& embedding, std::size_t n) {
    require(n >= 1, "top_n: n must be >= 1");
    const WordId c = require_word(embedding, center);
    const auto sims = similarities_to(c, embedding);
    std::vector<Neighbor> out;
    for (WordId id : rank_excluding(sims, c, n)) out.push_back({id, embedding.vocab->word(id), sims[id]});
    return out;
}

void summarize_curve(SimilarityCurve& curve) {
    const std::size_t nb = curve.betas.size();
    curve.mean.assign(nb, std::nullopt);
    curve.stddev.assign(nb, std::nullopt);
    for (std::size_t i = 0; i < nb; ++i) {
        std::vector<double> xs;
        for (const auto& v : curve.per_replica[i]) {
            if (v) xs.push_back(*v);
        }
        if (xs.empty()) continue;
        const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - m) * (x - m);
        curve.mean[i] = m;
        curve.stddev[i] = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
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

std::vector<SimilarityCurve> similarity_curves(std::string_view center, const std::vector<std::string>& neighbors,
                                               const EmbeddingSource& source) {
    const auto& betas = source.scales();
    const std::size_t nb = betas.size();
    const std::size_t nr = source.replicas();

    std::vector<SimilarityCurve> curves(neighbors.size());
    for (std::size_t k = 0; k < neighbors.size(); ++k) {
        curves[k].center = std::string(center);
        curves[k].neighbor = neighbors[k];
        curves[k].betas = betas;
        curves[k].per_replica.assign(nb, std::vector<std::optional<double>>(nr));
    }

    bool center_seen = false;
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t r = 0; r < nr; ++r) {
            auto e = source.get(betas[i], static_cast<std::uint32_t>(r));
            if (!e) continue;
            auto c = e->vocab->find(center);
            if (!c) continue;
            center_seen = true;
            const auto cv = e->input.row(*c);
            for (std::size_t k = 0; k < neighbors.size(); ++k) {
                auto w = e->vocab->find(neighbors[k]);
                if (!w) continue;
                curves[k].per_replica[i][r] = cosine(cv, e->input.row(*w));
            }
        }
    }
    if (!center_seen) throw std::out_of_range("center word not found at any scale: '" + std::string(center) + "'");
    for (auto& curve : curves) {
        summarize_curve(curve);
        if (!curve.peak_beta) {
            throw std::out_of_range("neighbor not found at any scale: '" + curve.neighbor + "'");
        }
    }
    return curves;
}

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::vector<CrossoverEvent> detect_crossovers(std::span<const SimilarityCurve> curves) {
    std::vector<CrossoverEvent> events;
    if (curves.empty()) return events;
    for (const auto& c : curves) {
        if (c.betas != curves[0].betas || c.mean.size() != c.betas.size()) {
            throw std::invalid_argument("detect_crossovers: curves do not share one scale grid");
        }
        if (c.center != curves[0].center) throw std::invalid_argument("detect_crossovers: curves have different centers");
    }
    const auto& betas = curves[0].betas;

    for (std::size_t x = 0; x < curves.size(); ++x) {
        for (std::size_t y = x + 1; y < curves.size(); ++y) {
            int last_sign = 0;
            std::optional<std::size_t> previous;      // last defined grid index
            std::optional<std::size_t> before_zero;   // defined index preceding a zero run
            std::optional<std::size_t> zero_start;    // first zero of the current run
            for (std::size_t i = 0; i < betas.size(); ++i) {
                const auto& a = curves[x].mean[i];
                const auto& b = curves[y].mean[i];
                if (!a || !b) continue;
                const int s = sign_of(*a - *b);
                if (s == 0) {
                    if (!zero_start) {
                        zero_start = i;
                        before_zero = previous;
                    }
                } else {
                    if (last_sign != 0 && s != last_sign) {
                        const std::size_t hi = zero_start ? *zero_start : i;
                        const std::size_t lo = zero_start ? *before_zero : *previous;
                        events.push_back({curves[x].center, curves[x].neighbor, curves[y].neighbor, betas[lo], betas[hi]});
                    }
                    last_sign = s;
                    zero_start.reset();
                }
                previous = i;
            }
        }
    }
    return events;
}

std::vector<NeighborCatalog> build_catalogs(std::string_view center, const EmbeddingSource& source,
                                            std::span<const std::size_t> cutoffs) {
    require(!cutoffs.empty(), "build_catalogs: no cutoffs");
    for (auto n : cutoffs) require(n >= 1, "build_catalogs: cutoff must be >= 1");
    const std::size_t widest = *std::max_element(cutoffs.begin(), cutoffs.end());
    const auto& betas = source.scales();

    std::vector<NeighborCatalog> catalogs(cutoffs.size());
    for (std::size_t k = 0; k < cutoffs.size(); ++k) {
        catalogs[k].center = std::string(center);
        catalogs[k].n = cutoffs[k];
        catalogs[k].betas = betas;
    }

    for (auto beta : betas) {
        // Replica-averaged similarity over the vocabulary of the first
        // available replica.
        std::shared_ptr<const Embedding> reference;
        std::vector<double> sum;
        std::vector<std::uint32_t> hits;
        for (std::uint32_t r = 0; r < source.replicas(); ++r) {
            auto e = source.get(beta, r);
            if (!e) continue;
            const WordId c = require_word(*e, center);
            const auto sims = similarities_to(c, *e);
            if (!reference) {
                reference = e;
                sum = sims;
                hits.assign(sims.size(), 1);
                continue;
            }
            const bool same_vocab = e->vocab->fingerprint() == reference->vocab->fingerprint();
            for (std::size_t i = 0; i < sum.size(); ++i) {
                std::optional<WordId> j = static_cast<WordId>(i);
                if (!same_vocab) j = e->vocab->find(reference->vocab->word(static_cast<WordId>(i)));
                if (!j) continue;
                sum[i] += sims[*j];
                ++hits[i];
            }
        }
        if (!reference) {
            throw std::out_of_range("no embedding available at beta " + std::to_string(beta) + " for catalog of '" +
                                    std::string(center) + "'");
        }
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= hits[i];
        const WordId c = *reference->vocab->find(center);
        const auto ranked = rank_excluding(sum, c, widest);

        for (std::size_t k = 0; k < cutoffs.size(); ++k) {
            std::vector<std::string> list;
            for (std::size_t j = 0; j < std::min(cutoffs[k], ranked.size()); ++j) {
                list.push_back(reference->vocab->word(ranked[j]));
            }
            catalogs[k].per_scale.push_back(std::move(list));
        }
    }

    for (auto& catalog : catalogs) {
        std::unordered_set<std::string> seen;
        for (const auto& list : catalog.per_scale) {
            for (const auto& w : list) {
                if (seen.insert(w).second) catalog.members.push_back(w);
            }
        }
    }
    return catalogs;
}

NeighborCatalog build_catalog(std::string_view center, const EmbeddingSource& source, std::size_t n) {
    const std::size_t cutoffs[] = {n};
    return std::move(build_catalogs(center, source, cutoffs).front());
}

PeakScaleHistogram bin_peaks(std::string_view center, std::span<const std::uint32_t> betas,
                             std::span<const std::uint32_t> peaks) {
    PeakScaleHistogram h;
    h.center = std::string(center);
    h.betas.assign(betas.begin(), betas.end());
    h.counts.assign(betas.size(), 0);
    h.fractions.assign(betas.size(), 0.0);
    h.members = peaks.size();
    for (auto p : peaks) {
        auto it = std::find(betas.begin(), betas.end(), p);
        require(it != betas.end(), "bin_peaks: peak beta is not on the grid");
        ++h.counts[static_cast<std::size_t>(it - betas.begin())];
    }
    if (h.members > 0) {
        for (std::size_t i = 0; i < betas.size(); ++i) {
            h.fractions[i] = static_cast<double>(h.counts[i]) / static_cast<double>(h.members);
        }
    }
    return h;
}

PeakScaleHistogram peak_histogram(const NeighborCatalog& catalog, const EmbeddingSource& source) {
    require(!catalog.members.empty(), "peak_histogram: empty catalog");
    const auto curves = similarity_curves(catalog.center, catalog.members, source);
    std::vector<std::uint32_t> peaks;
    peaks.reserve(curves.size());
    for (const auto& c : curves) peaks.push_back(*c.peak_beta);
    return bin_peaks(catalog.center, source.scales(), peaks);
}

namespace {

std::ostream& value(std::ostream& out, const std::optional<double>& v) {
    if (v) return out << std::setprecision(10) << *v;
    return out << "NA";
}

}  // namespace

void write_curves_tsv(std::span<const SimilarityCurve> curves, std::ostream& out, bool header) {
    if (header) out << "center\tneighbor\tbeta\tmean_sim\tstddev\n";
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.betas.size(); ++i) {
            out << c.center << '\t' << c.neighbor << '\t' << c.betas[i] << '\t';
            value(out, c.mean[i]) << '\t';
            value(out, c.stddev[i]) << '\n';
        }
    }
}

void write_crossovers_tsv(std::span<const CrossoverEvent> events, std::ostream& out, bool header) {
    if (header) out << "center\tword1\tword2\tbeta_lo\tbeta_hi\n";
    for (const auto& e : events) {
        out << e.center << '\t' << e.first << '\t' << e.second << '\t' << e.beta_lo << '\t' << e.beta_hi << '\n';
    }
}

void write_histogram_tsv(const PeakScaleHistogram& h, std::ostream& out, bool header) {
    if (header) out << "center\tbeta\tfraction\tcount\n";
    for (std::size_t i = 0; i < h.betas.size(); ++i) {
        out << h.center << '\t' << h.betas[i] << '\t' << std::setprecision(10) << h.fractions[i] << '\t'
            << h.counts[i] << '\n';
    }
}

void write_catalog_tsv(const NeighborCatalog& catalog, std::ostream& out, bool header) {
    if (header) out << "center\tn\tbeta\trank\tneighbor\n";
    for (std::size_t i = 0; i < catalog.betas.size(); ++i) {
        for (std::size_t r = 0; r < catalog.per_scale[i].size(); ++r) {
            out << catalog.center << '\t' << catalog.n << '\t' << catalog.betas[i] << '\t' << r + 1 << '\t'
                << catalog.per_scale[i][r] << '\n';
        }
    }
}

}  // namespace scalevec
