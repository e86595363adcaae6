#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gme/error.hpp"
#include "gme/rng.hpp"
#include "gme/types.hpp"

namespace gme {

/**
 * Lowercasing whitespace/punctuation tokenizer. A token is a maximal run of
 * ASCII letters (lowercased), digits, or bytes >= 0x80; everything else
 * separates tokens.
 */
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        const bool token_char = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
        if (token_char) {
            cur.push_back(static_cast<char>(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/**
 * Deterministic hashing token embedder (the stand-in for a contextual text
 * encoder). Each token maps to a d-vector whose entries are N(0, 1/d) draws
 * from a SplitMix64 stream seeded by fnv1a64(token) ^ mix64(seed), so equal
 * tokens always share a row and the whole matrix is a pure function of
 * (text, d, seed).
 */
inline TokenMatrix hash_embed(std::string_view text, std::size_t d, std::uint64_t seed) {
    if (d < 1) throw InvalidArgument("hash_embed: dimension must be >= 1");
    const std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) throw InvalidArgument("hash_embed: empty token sequence");
    TokenMatrix X(tokens.size(), d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const std::uint64_t seed_mix = mix64(seed);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        Rng rng(fnv1a64(tokens[i]) ^ seed_mix);
        for (std::size_t j = 0; j < d; ++j) X.at(i, j) = rng.gaussian() * scale;
    }
    return X;
}

/**
 * Seed-attention over the token matrix: alpha_ik = softmax_i(x_i . e_k)
 * (max-subtracted), a_k = sum_i alpha_ik x_i. In per-input mode (no seeds)
 * the assignment is the identity: token k becomes component k.
 */
inline AttentionState attend(const TokenMatrix& X, const ParamGenWeights& weights) {
    if (X.dim != weights.dim) throw DimensionError("attend: token dimension does not match weights");
    const std::size_t m = X.tokens;
    const std::size_t d = X.dim;
    AttentionState st;
    st.tokens = m;
    st.dim = d;
    if (weights.per_input_components()) {
        st.components = m;
        st.weights.assign(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) st.weights[i * m + i] = 1.0;
        st.attended = X.values;
        return st;
    }
    const std::size_t K = weights.components;
    st.components = K;
    st.weights.assign(m * K, 0.0);
    st.attended.assign(K * d, 0.0);
    std::vector<double> logits(m);
    for (std::size_t k = 0; k < K; ++k) {
        std::span<const double> e = weights.seed(k);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            std::span<const double> x = X.row(i);
            double z = 0.0;
            for (std::size_t j = 0; j < d; ++j) z += x[j] * e[j];
            logits[i] = z;
            max_logit = std::max(max_logit, z);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            logits[i] = std::exp(logits[i] - max_logit);
            norm += logits[i];
        }
        double* a_k = st.attended.data() + k * d;
        for (std::size_t i = 0; i < m; ++i) {
            const double alpha = logits[i] / norm;
            st.weights[i * K + k] = alpha;
            std::span<const double> x = X.row(i);
            for (std::size_t j = 0; j < d; ++j) a_k[j] += alpha * x[j];
        }
    }
    return st;
}

/// Mean/log-variance heads applied to an attention state. Exposed separately
/// so training can reuse the forward attention pass.
inline GmmEmbedding heads_apply(const AttentionState& st, const ParamGenWeights& weights) {
    GmmEmbedding g(st.components, st.dim);
    for (std::size_t k = 0; k < st.components; ++k) {
        weights.map_mean.apply(st.attended_row(k), g.mean(k));
        weights.map_logvar.apply(st.attended_row(k), g.log_var(k));
        for (double& lv : g.log_var(k)) lv = std::clamp(lv, kLogVarMin, kLogVarMax);
    }
    return g;
}

/// Full generator pi(X, K): attention, then the two affine heads with the
/// log-variance clamp.
inline GmmEmbedding generate_gmm(const TokenMatrix& X, const ParamGenWeights& weights) {
    return heads_apply(attend(X, weights), weights);
}

/**
 * Fresh generator weights: seeds and head weights are N(0, 1/d) draws from
 * the given stream, biases start at zero. components == 0 selects per-input
 * mode (as many components as tokens); seeds are then empty.
 */
inline ParamGenWeights init_param_gen(std::size_t components, std::size_t dim, Rng& rng) {
    if (dim < 1) throw InvalidArgument("init_param_gen: dimension must be >= 1");
    ParamGenWeights w;
    w.components = components;
    w.dim = dim;
    w.map_mean = AffineMap(dim);
    w.map_logvar = AffineMap(dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    w.seeds.assign(components * dim, 0.0);
    for (double& x : w.seeds) x = rng.gaussian() * scale;
    for (double& x : w.map_mean.weight) x = rng.gaussian() * scale;
    for (double& x : w.map_logvar.weight) x = rng.gaussian() * scale;
    return w;
}

}  // namespace gme
