#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gme/divergence.hpp"
#include "gme/error.hpp"
#include "gme/rng.hpp"
#include "gme/serialize.hpp"
#include "gme/types.hpp"

namespace gme {

namespace detail {

inline double l2_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

/**
 * Lloyd k-means over row-major vectors with seeded k-means++ initialization.
 * Empty clusters are reseeded to the point farthest from its assigned
 * centroid. Fully deterministic given the seed; iters == 0 returns the
 * initialization unchanged.
 */
inline std::vector<double> kmeans(const std::vector<double>& vectors, std::size_t n, std::size_t d,
                                  std::size_t cells, std::size_t iters, std::uint64_t seed) {
    if (cells < 1) throw InvalidArgument("kmeans: need at least one cell");
    if (n < cells) throw InvalidArgument("kmeans: fewer points than cells");
    if (vectors.size() != n * d) throw InvalidArgument("kmeans: vector buffer size mismatch");
    auto point = [&](std::size_t i) { return std::span<const double>(vectors.data() + i * d, d); };

    Rng rng(mix64(seed));
    std::vector<double> centroids;
    centroids.reserve(cells * d);
    std::vector<double> dist_sq(n, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> chosen(n, 0);

    // k-means++ seeding: first centroid uniform, then proportional to D^2.
    std::size_t first = static_cast<std::size_t>(rng.uniform_int(n));
    centroids.insert(centroids.end(), point(first).begin(), point(first).end());
    chosen[first] = 1;
    for (std::size_t c = 1; c < cells; ++c) {
        std::span<const double> last(centroids.data() + (c - 1) * d, d);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist_sq[i] = std::min(dist_sq[i], detail::l2_sq(point(i), last));
            total += dist_sq[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist_sq[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = n - 1;
        } else {
            // all remaining points coincide with a centroid; take the first unchosen
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            if (pick == n) pick = 0;
        }
        chosen[pick] = 1;
        centroids.insert(centroids.end(), point(pick).begin(), point(pick).end());
    }

    std::vector<std::size_t> assign(n, 0);
    std::vector<std::size_t> counts(cells, 0);
    for (std::size_t it = 0; it < iters; ++it) {
        // assignment step, ties to the lowest centroid index
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < cells; ++c) {
                const double v = detail::l2_sq(point(i), {centroids.data() + c * d, d});
                if (v < best) {
                    best = v;
                    best_c = c;
                }
            }
            assign[i] = best_c;
        }
        // update step
        std::fill(centroids.begin(), centroids.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            double* ctr = centroids.data() + assign[i] * d;
            std::span<const double> p = point(i);
            for (std::size_t j = 0; j < d; ++j) ctr[j] += p[j];
        }
        for (std::size_t c = 0; c < cells; ++c)
            if (counts[c] > 0)
                for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] /= static_cast<double>(counts[c]);
        // reseed empty clusters to the globally farthest point
        for (std::size_t c = 0; c < cells; ++c) {
            if (counts[c] > 0) continue;
            double far_d = -1.0;
            std::size_t far_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assign[i]] <= 1) continue;  // don't strand another cluster
                const double v = detail::l2_sq(point(i), {centroids.data() + assign[i] * d, d});
                if (v > far_d) {
                    far_d = v;
                    far_i = i;
                }
            }
            --counts[assign[far_i]];
            assign[far_i] = c;
            counts[c] = 1;
            std::copy_n(point(far_i).begin(), d, centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
        }
    }
    return centroids;
}

/// Retrieval result: item id, approximate-KL score, and the context
/// components whose pre-retrieval produced the candidate.
struct ScoredCandidate {
    std::string id;
    double score = 0.0;
    std::vector<std::uint32_t> matched_ctx_components;
};

/**
 * Inverted-file index over the flattened component means of response GMMs.
 *
 * Every component mean of every stored response is assigned to its nearest
 * coarse centroid; a query probes n_probe cells per context component,
 * collects the nearest component means, maps them back to responses and
 * re-ranks the deduplicated candidates by the full mixture-KL approximation.
 * All stored parameters live on the f32 grid so save/load is lossless.
 */
class GmmIndex {
  public:
    struct InvList {
        std::vector<double> means;  // len x d, row-major
        std::vector<std::uint32_t> response;
        std::vector<std::uint32_t> component;
        std::size_t size() const { return response.size(); }
    };

    static GmmIndex build(const std::vector<GmmRecord>& responses, std::size_t cells = 0,
                          std::size_t n_probe = 0, std::uint64_t seed = 1,
                          std::size_t kmeans_iters = 20) {
        if (responses.empty()) throw InvalidArgument("build_index: no responses");
        GmmIndex idx;
        idx.dim_ = responses.front().gmm.dim;
        std::size_t total_means = 0;
        for (const GmmRecord& r : responses) {
            r.gmm.validate();
            if (r.gmm.dim != idx.dim_) throw DimensionError("build_index: inconsistent embedding dimensions");
            if (idx.id_to_ordinal_.count(r.id)) throw InvalidArgument("build_index: duplicate id '" + r.id + "'");
            idx.id_to_ordinal_[r.id] = static_cast<std::uint32_t>(idx.ids_.size());
            idx.ids_.push_back(r.id);
            idx.gmms_.push_back(quantize_f32(r.gmm));
            total_means += r.gmm.components;
        }
        idx.cells_ = cells > 0 ? cells
                               : static_cast<std::size_t>(
                                     std::ceil(std::sqrt(static_cast<double>(total_means))));
        idx.cells_ = std::min(idx.cells_, total_means);
        idx.n_probe_ = n_probe > 0 ? n_probe : std::max<std::size_t>(1, idx.cells_ / 16);
        idx.n_probe_ = std::min(idx.n_probe_, idx.cells_);

        std::vector<double> flat;
        flat.reserve(total_means * idx.dim_);
        for (const GmmEmbedding& g : idx.gmms_)
            flat.insert(flat.end(), g.means.begin(), g.means.end());
        idx.centroids_ = kmeans(flat, total_means, idx.dim_, idx.cells_, kmeans_iters, seed);
        for (double& x : idx.centroids_) x = to_f32_grid(x);

        idx.lists_.assign(idx.cells_, {});
        for (std::size_t r = 0; r < idx.gmms_.size(); ++r) {
            const GmmEmbedding& g = idx.gmms_[r];
            for (std::size_t k = 0; k < g.components; ++k) {
                const std::size_t c = idx.nearest_centroid(g.mean(k));
                InvList& list = idx.lists_[c];
                list.means.insert(list.means.end(), g.mean(k).begin(), g.mean(k).end());
                list.response.push_back(static_cast<std::uint32_t>(r));
                list.component.push_back(static_cast<std::uint32_t>(k));
            }
        }
        return idx;
    }

    /**
     * Pre-retrieve per context component, dedupe, re-rank by gmm_kl_approx
     * ascending. Ties break on (score, id). per_component_k and n_probe may
     * be overridden per query (0 keeps the index defaults).
     *
     * Cells are probed in proximity order and a running top-k of component
     * means is kept per context component; every entry that ever enters the
     * running top-k stays a candidate. Probing more cells or raising
     * per_component_k can therefore only grow the candidate set.
     */
    std::vector<ScoredCandidate> query(const GmmEmbedding& ctx, std::size_t per_component_k = 10,
                                       std::size_t top_m = 10, std::size_t n_probe_override = 0) const {
        if (top_m < 1) throw InvalidArgument("query: top_m must be >= 1");
        if (per_component_k < 1) throw InvalidArgument("query: per_component_k must be >= 1");
        if (ctx.dim != dim_) throw DimensionError("query: context dimension does not match index");
        if (ids_.empty()) throw InvalidArgument("query: empty index");
        const std::size_t probes = std::min(n_probe_override > 0 ? n_probe_override : n_probe_, cells_);

        std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> hits;  // response -> ctx components
        std::vector<std::pair<double, std::size_t>> cell_order(cells_);
        // running top-k ordered worst-first: (dist^2, response, component)
        using Entry = std::tuple<double, std::uint32_t, std::uint32_t>;
        std::priority_queue<Entry> running;
        for (std::size_t k = 0; k < ctx.components; ++k) {
            std::span<const double> q = ctx.mean(k);
            for (std::size_t c = 0; c < cells_; ++c)
                cell_order[c] = {detail::l2_sq(q, {centroids_.data() + c * dim_, dim_}), c};
            std::partial_sort(cell_order.begin(), cell_order.begin() + static_cast<std::ptrdiff_t>(probes),
                              cell_order.end());
            while (!running.empty()) running.pop();
            for (std::size_t p = 0; p < probes; ++p) {
                const InvList& list = lists_[cell_order[p].second];
                for (std::size_t e = 0; e < list.size(); ++e) {
                    const Entry cand{detail::l2_sq(q, {list.means.data() + e * dim_, dim_}),
                                     list.response[e], list.component[e]};
                    if (running.size() < per_component_k) {
                        running.push(cand);
                    } else if (cand < running.top()) {
                        running.pop();
                        running.push(cand);
                    } else {
                        continue;
                    }
                    std::vector<std::uint32_t>& comps = hits[std::get<1>(cand)];
                    if (comps.empty() || comps.back() != static_cast<std::uint32_t>(k))
                        comps.push_back(static_cast<std::uint32_t>(k));
                }
            }
        }

        std::vector<ScoredCandidate> scored;
        scored.reserve(hits.size());
        for (const auto& [ordinal, comps] : hits) {
            ScoredCandidate c;
            c.id = ids_[ordinal];
            c.score = gmm_kl_approx(gmms_[ordinal], ctx).total;
            c.matched_ctx_components = comps;
            scored.push_back(std::move(c));
        }
        std::sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
            return a.score != b.score ? a.score < b.score : a.id < b.id;
        });
        if (scored.size() > top_m) scored.resize(top_m);
        return scored;
    }

    // ---- serialization -----------------------------------------------------

    std::vector<std::uint8_t> save() const {
        ByteWriter w;
        w.magic(kIndexMagic);
        w.u32(kFormatVersion);
        w.u32(static_cast<std::uint32_t>(dim_));
        w.u32(static_cast<std::uint32_t>(cells_));
        w.u32(static_cast<std::uint32_t>(n_probe_));
        w.u64(ids_.size());
        w.f32_block(centroids_);
        for (const InvList& list : lists_) {
            w.u64(list.size());
            for (std::size_t e = 0; e < list.size(); ++e) {
                w.u32(list.response[e]);
                w.u32(list.component[e]);
                w.f32_block({list.means.data() + e * dim_, dim_});
            }
        }
        for (std::size_t r = 0; r < ids_.size(); ++r) {
            w.str(ids_[r]);
            write_gmm_body(w, gmms_[r]);
        }
        return std::move(w.bytes);
    }

    static GmmIndex load(std::span<const std::uint8_t> bytes) {
        ByteReader r(bytes);
        r.expect_magic(kIndexMagic, "index");
        r.expect_version(kFormatVersion);
        GmmIndex idx;
        idx.dim_ = r.u32();
        idx.cells_ = r.u32();
        idx.n_probe_ = r.u32();
        const std::uint64_t n_responses = r.u64();
        if (idx.dim_ < 1 || idx.cells_ < 1) throw CorruptFormatError("index with zero cells or dimensions");
        idx.centroids_.assign(idx.cells_ * idx.dim_, 0.0);
        r.f32_block(idx.centroids_);
        idx.lists_.assign(idx.cells_, {});
        for (InvList& list : idx.lists_) {
            const std::uint64_t len = r.u64();
            list.means.reserve(len * idx.dim_);
            list.response.reserve(len);
            list.component.reserve(len);
            for (std::uint64_t e = 0; e < len; ++e) {
                list.response.push_back(r.u32());
                list.component.push_back(r.u32());
                std::vector<double> mean(idx.dim_);
                r.f32_block(mean);
                list.means.insert(list.means.end(), mean.begin(), mean.end());
            }
        }
        for (std::uint64_t i = 0; i < n_responses; ++i) {
            std::string id = r.str();
            GmmEmbedding g = read_gmm_body(r);
            if (g.dim != idx.dim_) throw CorruptFormatError("index store dimension mismatch");
            idx.id_to_ordinal_[id] = static_cast<std::uint32_t>(idx.ids_.size());
            idx.ids_.push_back(std::move(id));
            idx.gmms_.push_back(std::move(g));
        }
        r.expect_end();
        for (const InvList& list : idx.lists_)
            for (std::uint32_t resp : list.response)
                if (resp >= idx.ids_.size()) throw CorruptFormatError("index list references unknown response");
        return idx;
    }

    // ---- introspection ------------------------------------------------------

    std::size_t dim() const { return dim_; }
    std::size_t cells() const { return cells_; }
    std::size_t n_probe() const { return n_probe_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t total_entries() const {
        std::size_t n = 0;
        for (const InvList& l : lists_) n += l.size();
        return n;
    }
    const std::vector<std::string>& ids() const { return ids_; }
    const GmmEmbedding& stored_gmm(std::size_t ordinal) const { return gmms_[ordinal]; }
    const GmmEmbedding* find(const std::string& id) const {
        auto it = id_to_ordinal_.find(id);
        return it == id_to_ordinal_.end() ? nullptr : &gmms_[it->second];
    }
    const std::vector<InvList>& lists() const { return lists_; }
    std::span<const double> centroid(std::size_t c) const { return {centroids_.data() + c * dim_, dim_}; }

  private:
    std::size_t nearest_centroid(std::span<const double> v) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < cells_; ++c) {
            const double dist = detail::l2_sq(v, {centroids_.data() + c * dim_, dim_});
            if (dist < best) {
                best = dist;
                best_c = c;
            }
        }
        return best_c;
    }

    std::size_t dim_ = 0;
    std::size_t cells_ = 0;
    std::size_t n_probe_ = 1;
    std::vector<double> centroids_;  // cells x d, on the f32 grid
    std::vector<InvList> lists_;
    std::vector<std::string> ids_;
    std::vector<GmmEmbedding> gmms_;  // parameters on the f32 grid
    std::unordered_map<std::string, std::uint32_t> id_to_ordinal_;
};

}  // namespace gme
