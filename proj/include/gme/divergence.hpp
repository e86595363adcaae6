#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "gme/error.hpp"
#include "gme/rng.hpp"
#include "gme/types.hpp"

namespace gme {

/**
 * KL divergence between two axis-aligned Gaussians with parameters given as
 * mean / log-variance vectors:
 *
 *   KL(r || c) = 1/2 sum_j [ log(s_cj/s_rj) + (s_rj + (mu_rj - mu_cj)^2) / s_cj - 1 ]
 *
 * with s = sigma^2. Computed as exp(lr - lc) + delta^2 * exp(-lc) per
 * dimension so identical parameters give exactly zero. Accumulates in double.
 */
inline double gauss_kl_diag(std::span<const double> mu_r, std::span<const double> logvar_r,
                            std::span<const double> mu_c, std::span<const double> logvar_c) {
    const std::size_t d = mu_r.size();
    if (logvar_r.size() != d || mu_c.size() != d || logvar_c.size() != d)
        throw DimensionError("gauss_kl_diag: operand dimensions differ");
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        if (!std::isfinite(mu_r[j]) || !std::isfinite(logvar_r[j]) || !std::isfinite(mu_c[j]) ||
            !std::isfinite(logvar_c[j]))
            throw InvalidArgument("gauss_kl_diag: non-finite input");
        const double dl = logvar_c[j] - logvar_r[j];
        const double dm = mu_r[j] - mu_c[j];
        total += 0.5 * (dl + std::exp(-dl) + dm * dm * std::exp(-logvar_c[j]) - 1.0);
    }
    return total < 0.0 ? 0.0 : total;  // guard rounding on near-identical pairs
}

/// Decomposition of the mixture KL approximation: per response component the
/// selected context component and its Gaussian KL, plus the log(K/L) term.
struct KlBreakdown {
    double total = 0.0;
    std::vector<std::pair<std::size_t, double>> per_response_component;  // (k*, kl)
    double log_ratio_term = 0.0;
};

/**
 * Closed-form approximation of KL(resp || ctx) for equal-weight diagonal
 * GMMs: each response component is matched to its nearest context component,
 * the per-pair KLs are averaged and log(K/L) is added. Ties in the min pick
 * the lowest context component index.
 */
inline KlBreakdown gmm_kl_approx(const GmmEmbedding& resp, const GmmEmbedding& ctx) {
    if (resp.dim != ctx.dim) throw DimensionError("gmm_kl_approx: embedding dimensions differ");
    const std::size_t L = resp.components;
    const std::size_t K = ctx.components;
    KlBreakdown out;
    out.per_response_component.reserve(L);
    double sum = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < K; ++k) {
            double v = gauss_kl_diag(resp.mean(l), resp.log_var(l), ctx.mean(k), ctx.log_var(k));
            if (v < best) {
                best = v;
                best_k = k;
            }
        }
        out.per_response_component.emplace_back(best_k, best);
        sum += best;
    }
    out.log_ratio_term = std::log(static_cast<double>(K) / static_cast<double>(L));
    out.total = sum / static_cast<double>(L) + out.log_ratio_term;
    return out;
}

/// Monte-Carlo estimate with its standard error.
struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

namespace detail {

/// log density of an equal-weight diagonal GMM at z, via log-sum-exp.
inline double gmm_log_density(const GmmEmbedding& g, std::span<const double> z) {
    constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
    const std::size_t d = g.dim;
    double max_lp = -std::numeric_limits<double>::infinity();
    std::vector<double> lps(g.components);
    for (std::size_t k = 0; k < g.components; ++k) {
        double lp = 0.0;
        std::span<const double> mu = g.mean(k);
        std::span<const double> lv = g.log_var(k);
        for (std::size_t j = 0; j < d; ++j) {
            const double dz = z[j] - mu[j];
            lp += -0.5 * (kLog2Pi + lv[j] + dz * dz * std::exp(-lv[j]));
        }
        lps[k] = lp;
        max_lp = std::max(max_lp, lp);
    }
    double acc = 0.0;
    for (double lp : lps) acc += std::exp(lp - max_lp);
    return max_lp + std::log(acc) - std::log(static_cast<double>(g.components));
}

}  // namespace detail

/**
 * Monte-Carlo oracle for KL(p || q): draw z ~ p (uniform component choice,
 * then a diagonal Gaussian draw), average log p(z) - log q(z). Exact in
 * expectation; the closed-form approximation above is checked against it.
 */
inline McEstimate gmm_kl_monte_carlo(const GmmEmbedding& p, const GmmEmbedding& q,
                                     std::size_t n_samples, std::uint64_t seed) {
    if (p.dim != q.dim) throw DimensionError("gmm_kl_monte_carlo: embedding dimensions differ");
    if (n_samples < 1000) throw InvalidArgument("gmm_kl_monte_carlo: need at least 1000 samples");
    Rng rng(seed);
    std::vector<double> z(p.dim);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(p.components));
        std::span<const double> mu = p.mean(k);
        std::span<const double> lv = p.log_var(k);
        for (std::size_t j = 0; j < p.dim; ++j)
            z[j] = mu[j] + std::exp(0.5 * lv[j]) * rng.gaussian();
        const double diff = detail::gmm_log_density(p, z) - detail::gmm_log_density(q, z);
        sum += diff;
        sum_sq += diff * diff;
    }
    const double n = static_cast<double>(n_samples);
    McEstimate out;
    out.estimate = sum / n;
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    out.std_error = std::sqrt(var / n);
    return out;
}

/**
 * Late-interaction similarity: for each context token take the maximum inner
 * product over response tokens, then sum over context tokens.
 */
inline double colbert_maxsim(const TokenMatrix& ctx_tokens, const TokenMatrix& resp_tokens) {
    if (ctx_tokens.dim != resp_tokens.dim) throw DimensionError("colbert_maxsim: token dimensions differ");
    const std::size_t d = ctx_tokens.dim;
    double total = 0.0;
    for (std::size_t i = 0; i < ctx_tokens.tokens; ++i) {
        std::span<const double> c = ctx_tokens.row(i);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < resp_tokens.tokens; ++j) {
            std::span<const double> r = resp_tokens.row(j);
            double dot = 0.0;
            for (std::size_t l = 0; l < d; ++l) dot += c[l] * r[l];
            best = std::max(best, dot);
        }
        total += best;
    }
    return total;
}

/// Plain inner product of two pooled vectors.
inline double sbert_dot(std::span<const double> pooled_a, std::span<const double> pooled_b) {
    if (pooled_a.size() != pooled_b.size()) throw DimensionError("sbert_dot: vector dimensions differ");
    double acc = 0.0;
    for (std::size_t j = 0; j < pooled_a.size(); ++j) acc += pooled_a[j] * pooled_b[j];
    return acc;
}

/// Arithmetic mean over token rows (the pooling used by the single-vector baseline).
inline std::vector<double> mean_pool(const TokenMatrix& tokens) {
    std::vector<double> out(tokens.dim, 0.0);
    for (std::size_t i = 0; i < tokens.tokens; ++i) {
        std::span<const double> r = tokens.row(i);
        for (std::size_t j = 0; j < tokens.dim; ++j) out[j] += r[j];
    }
    for (double& x : out) x /= static_cast<double>(tokens.tokens);
    return out;
}

}  // namespace gme
