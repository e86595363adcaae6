#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "gme/divergence.hpp"
#include "gme/error.hpp"
#include "gme/index.hpp"
#include "gme/types.hpp"

namespace gme {

struct LatencyStats {
    double mean_ms = 0.0;
    double p95_ms = 0.0;
};

/**
 * Wall-clock per-query latency of run(i) over i in [0, n_queries), after
 * `warmup` unmeasured calls of run(0).
 */
template <typename Fn>
LatencyStats measure_latency(Fn&& run, std::size_t n_queries, std::size_t warmup = 3) {
    if (n_queries == 0) throw InvalidArgument("measure_latency: need at least one query");
    for (std::size_t w = 0; w < warmup; ++w) run(0);
    std::vector<double> ms(n_queries);
    for (std::size_t i = 0; i < n_queries; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run(i);
        const auto t1 = std::chrono::steady_clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    LatencyStats out;
    out.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(n_queries);
    std::sort(ms.begin(), ms.end());
    const std::size_t idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(n_queries)));
    out.p95_ms = ms[std::min(n_queries - 1, idx == 0 ? 0 : idx - 1)];
    return out;
}

/// Brute-force single-vector backend: item ordinals by descending inner product.
inline std::vector<std::size_t> rank_by_dot(std::span<const std::vector<double>> item_pooled,
                                            std::span<const double> query_pooled, std::size_t top_m) {
    std::vector<std::size_t> order(item_pooled.size());
    std::vector<double> score(item_pooled.size());
    for (std::size_t i = 0; i < item_pooled.size(); ++i) {
        order[i] = i;
        score[i] = sbert_dot(item_pooled[i], query_pooled);
    }
    const std::size_t keep = std::min(top_m, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return score[a] != score[b] ? score[a] > score[b] : a < b;
                      });
    order.resize(keep);
    return order;
}

/// Brute-force late-interaction backend: item ordinals by descending max-sim.
inline std::vector<std::size_t> rank_by_maxsim(std::span<const TokenMatrix> item_tokens,
                                               const TokenMatrix& query_tokens, std::size_t top_m) {
    std::vector<std::size_t> order(item_tokens.size());
    std::vector<double> score(item_tokens.size());
    for (std::size_t i = 0; i < item_tokens.size(); ++i) {
        order[i] = i;
        score[i] = colbert_maxsim(query_tokens, item_tokens[i]);
    }
    const std::size_t keep = std::min(top_m, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return score[a] != score[b] ? score[a] > score[b] : a < b;
                      });
    order.resize(keep);
    return order;
}

/// Exhaustive mixture-KL backend: item ordinals by ascending approximate KL.
inline std::vector<std::size_t> rank_by_gmm_scan(std::span<const GmmEmbedding> item_gmms,
                                                 const GmmEmbedding& ctx, std::size_t top_m) {
    std::vector<std::size_t> order(item_gmms.size());
    std::vector<double> score(item_gmms.size());
    for (std::size_t i = 0; i < item_gmms.size(); ++i) {
        order[i] = i;
        score[i] = gmm_kl_approx(item_gmms[i], ctx).total;
    }
    const std::size_t keep = std::min(top_m, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return score[a] != score[b] ? score[a] < score[b] : a < b;
                      });
    order.resize(keep);
    return order;
}

}  // namespace gme
