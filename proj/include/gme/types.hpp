#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gme/error.hpp"

namespace gme {

/// Log-variance heads are clamped into this range so every KL term stays finite.
constexpr double kLogVarMin = -10.0;
constexpr double kLogVarMax = 10.0;

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// m x d matrix of token-level feature vectors, row-major.
struct TokenMatrix {
    std::size_t tokens = 0;  // m
    std::size_t dim = 0;     // d
    std::vector<double> values;

    TokenMatrix() = default;
    TokenMatrix(std::size_t m, std::size_t d) : tokens(m), dim(d), values(m * d, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[i * dim + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }

    void validate() const {
        if (tokens < 1 || dim < 1) throw InvalidArgument("TokenMatrix: need at least one token and one dimension");
        if (values.size() != tokens * dim) throw InvalidArgument("TokenMatrix: value buffer size mismatch");
        if (!all_finite(values)) throw InvalidArgument("TokenMatrix: non-finite entry");
    }
};

/**
 * Equal-weight mixture of K axis-aligned Gaussians over R^d.
 *
 * Component weights are implicitly 1/K and covariances are diagonal, so the
 * full parameterization is the K x d mean matrix plus the K x d matrix of
 * per-dimension log-variances (clamped to [kLogVarMin, kLogVarMax]).
 */
struct GmmEmbedding {
    std::size_t components = 0;  // K
    std::size_t dim = 0;         // d
    std::vector<double> means;     // K x d row-major
    std::vector<double> log_vars;  // K x d row-major

    GmmEmbedding() = default;
    GmmEmbedding(std::size_t k, std::size_t d)
        : components(k), dim(d), means(k * d, 0.0), log_vars(k * d, 0.0) {}

    std::span<const double> mean(std::size_t k) const { return {means.data() + k * dim, dim}; }
    std::span<double> mean(std::size_t k) { return {means.data() + k * dim, dim}; }
    std::span<const double> log_var(std::size_t k) const { return {log_vars.data() + k * dim, dim}; }
    std::span<double> log_var(std::size_t k) { return {log_vars.data() + k * dim, dim}; }

    bool operator==(const GmmEmbedding&) const = default;

    void validate() const {
        if (components < 1 || dim < 1) throw InvalidArgument("GmmEmbedding: need K >= 1 and d >= 1");
        if (means.size() != components * dim || log_vars.size() != components * dim)
            throw InvalidArgument("GmmEmbedding: buffer size mismatch");
        if (!all_finite(means) || !all_finite(log_vars)) throw InvalidArgument("GmmEmbedding: non-finite entry");
        for (double lv : log_vars)
            if (lv < kLogVarMin || lv > kLogVarMax)
                throw InvalidArgument("GmmEmbedding: log-variance outside clamp range");
    }
};

/// Affine map R^d -> R^d: out = W * in + b, W row-major d x d.
struct AffineMap {
    std::size_t dim = 0;
    std::vector<double> weight;  // d x d row-major
    std::vector<double> bias;    // d

    AffineMap() = default;
    explicit AffineMap(std::size_t d) : dim(d), weight(d * d, 0.0), bias(d, 0.0) {}

    void apply(std::span<const double> in, std::span<double> out) const {
        for (std::size_t j = 0; j < dim; ++j) {
            double acc = bias[j];
            const double* wrow = weight.data() + j * dim;
            for (std::size_t l = 0; l < dim; ++l) acc += wrow[l] * in[l];
            out[j] = acc;
        }
    }

    bool operator==(const AffineMap&) const = default;
};

/**
 * Trainable state of one Gaussian-mixture parameter generator: K seed
 * embeddings that attend over tokens, and the two affine heads producing
 * means and log-variances from the attended vectors.
 *
 * seeds with zero rows selects the per-input mode where every token becomes
 * its own component (K = m, attention is the identity assignment).
 */
struct ParamGenWeights {
    std::size_t components = 0;  // K; 0 = per-input component count
    std::size_t dim = 0;
    std::vector<double> seeds;  // K x d row-major
    AffineMap map_mean;         // f1
    AffineMap map_logvar;       // f2

    std::span<const double> seed(std::size_t k) const { return {seeds.data() + k * dim, dim}; }
    std::span<double> seed(std::size_t k) { return {seeds.data() + k * dim, dim}; }

    bool per_input_components() const { return components == 0; }

    bool operator==(const ParamGenWeights&) const = default;

    void validate() const {
        if (dim < 1) throw InvalidArgument("ParamGenWeights: dim must be >= 1");
        if (seeds.size() != components * dim) throw InvalidArgument("ParamGenWeights: seeds shape mismatch");
        if (map_mean.dim != dim || map_logvar.dim != dim)
            throw InvalidArgument("ParamGenWeights: head dimension mismatch");
        if (!all_finite(seeds) || !all_finite(map_mean.weight) || !all_finite(map_mean.bias) ||
            !all_finite(map_logvar.weight) || !all_finite(map_logvar.bias))
            throw InvalidArgument("ParamGenWeights: non-finite entry");
    }
};

/// Attention weights (m x K, columns are probability vectors) and the
/// attended per-component token summaries (K x d).
struct AttentionState {
    std::size_t tokens = 0;      // m
    std::size_t components = 0;  // K
    std::size_t dim = 0;         // d
    std::vector<double> weights;   // m x K row-major, alpha_ik
    std::vector<double> attended;  // K x d row-major, a_k

    double alpha(std::size_t i, std::size_t k) const { return weights[i * components + k]; }
    std::span<const double> attended_row(std::size_t k) const { return {attended.data() + k * dim, dim}; }
};

/// One corpus record: an id plus raw text and/or a precomputed token matrix.
struct CorpusItem {
    std::string id;
    std::optional<std::string> text;
    std::optional<TokenMatrix> tokens;
};

/// One context-response training pair.
struct PairItem {
    std::string id;
    std::string context;
    std::string response;
};

}  // namespace gme
