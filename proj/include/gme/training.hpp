#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gme/divergence.hpp"
#include "gme/error.hpp"
#include "gme/paramgen.hpp"
#include "gme/rng.hpp"
#include "gme/types.hpp"

namespace gme {

/// One in-batch training example.
struct BatchPair {
    TokenMatrix context;
    TokenMatrix response;
};

/// A batch of context-response pairs; in-batch negatives require B >= 2.
struct Batch {
    std::vector<BatchPair> pairs;

    std::size_t size() const { return pairs.size(); }

    void validate() const {
        if (pairs.size() < 2) throw InvalidArgument("Batch: need at least 2 pairs for in-batch negatives");
        const std::size_t d = pairs.front().context.dim;
        for (const BatchPair& p : pairs) {
            p.context.validate();
            p.response.validate();
            if (p.context.dim != d || p.response.dim != d)
                throw DimensionError("Batch: all token matrices must share one dimension");
        }
    }
};

struct TrainConfig {
    std::size_t k_ctx = 4;   // context components; 0 = per-input ("all")
    std::size_t k_resp = 4;  // response components; 0 = per-input
    std::size_t dim = 32;    // embedding width fed to the hashing embedder
    double lr = 1.5e-5;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 50;
    std::size_t patience = 3;
    std::uint64_t seed = 1;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double val_fraction = 0.1;
    bool use_bias = true;  // affine heads; false restricts f1/f2 to pure linear maps

    void validate() const {
        if (lr < 0.0 || !std::isfinite(lr)) throw InvalidArgument("TrainConfig: lr must be nonnegative");
        if (batch_size < 2) throw InvalidArgument("TrainConfig: batch_size must be >= 2");
        if (patience < 1) throw InvalidArgument("TrainConfig: patience must be >= 1");
        if (dim < 1) throw InvalidArgument("TrainConfig: dim must be >= 1");
        if (max_epochs < 1) throw InvalidArgument("TrainConfig: max_epochs must be >= 1");
        if (val_fraction <= 0.0 || val_fraction >= 1.0)
            throw InvalidArgument("TrainConfig: val_fraction must be in (0, 1)");
    }
};

/// Parse the flat key=value config format ('#' starts a comment, blank lines
/// ignored, component counts accept "all").
inline TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto parse_k = [](const std::string& v) -> std::size_t {
        return v == "all" ? 0 : static_cast<std::size_t>(std::stoull(v));
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line is not key=value", line_no);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(val);
        try {
            if (key == "k_ctx") cfg.k_ctx = parse_k(val);
            else if (key == "k_resp") cfg.k_resp = parse_k(val);
            else if (key == "dim") cfg.dim = std::stoull(val);
            else if (key == "lr") cfg.lr = std::stod(val);
            else if (key == "batch_size") cfg.batch_size = std::stoull(val);
            else if (key == "max_epochs") cfg.max_epochs = std::stoull(val);
            else if (key == "patience") cfg.patience = std::stoull(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
            else if (key == "val_fraction") cfg.val_fraction = std::stod(val);
            else if (key == "use_bias") cfg.use_bias = (val == "1" || val == "true" || val == "yes");
            else throw ParseError("unknown config key '" + key + "'", line_no);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("bad value for config key '" + key + "'", line_no);
        }
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/**
 * Softmax cross-entropy core over a B x B matrix of divergences, with
 * kl[i*B+j] = KL(resp_j || ctx_i):
 *
 *   loss_i = kl_ii + log sum_j exp(-kl_ij)
 *
 * i.e. the negative log of the true pair's softmax probability in row i,
 * computed with log-sum-exp stability. Returns the per-pair losses; the
 * batch loss is their mean.
 */
inline std::vector<double> npair_loss_from_kl(const std::vector<double>& kl, std::size_t b) {
    if (b < 2 || kl.size() != b * b) throw InvalidArgument("npair_loss_from_kl: need a BxB matrix with B >= 2");
    std::vector<double> per_pair(b);
    for (std::size_t i = 0; i < b; ++i) {
        double min_kl = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b; ++j) min_kl = std::min(min_kl, kl[i * b + j]);
        double acc = 0.0;
        for (std::size_t j = 0; j < b; ++j) acc += std::exp(min_kl - kl[i * b + j]);
        per_pair[i] = kl[i * b + i] - min_kl + std::log(acc);
    }
    return per_pair;
}

namespace detail {

/// Forward pass of one generator with everything the backward pass needs.
struct GenForward {
    AttentionState att;
    GmmEmbedding gmm;
    std::vector<std::uint8_t> clamped;  // K x d, 1 where the log-var clamp is active
};

inline GenForward forward_gmm(const TokenMatrix& X, const ParamGenWeights& w) {
    GenForward f;
    f.att = attend(X, w);
    f.gmm = GmmEmbedding(f.att.components, f.att.dim);
    f.clamped.assign(f.att.components * f.att.dim, 0);
    for (std::size_t k = 0; k < f.att.components; ++k) {
        w.map_mean.apply(f.att.attended_row(k), f.gmm.mean(k));
        w.map_logvar.apply(f.att.attended_row(k), f.gmm.log_var(k));
        for (std::size_t j = 0; j < f.att.dim; ++j) {
            double& lv = f.gmm.log_vars[k * f.att.dim + j];
            if (lv < kLogVarMin || lv > kLogVarMax) {
                f.clamped[k * f.att.dim + j] = 1;
                lv = std::clamp(lv, kLogVarMin, kLogVarMax);
            }
        }
    }
    return f;
}

}  // namespace detail

struct NpairLoss {
    double loss = 0.0;
    std::vector<double> per_pair;
};

/// N-pair contrastive loss of a batch under the two generators.
inline NpairLoss npair_loss(const Batch& batch, const ParamGenWeights& ctx_weights,
                            const ParamGenWeights& resp_weights) {
    batch.validate();
    const std::size_t b = batch.size();
    std::vector<GmmEmbedding> ctx(b), resp(b);
    for (std::size_t i = 0; i < b; ++i) {
        ctx[i] = generate_gmm(batch.pairs[i].context, ctx_weights);
        resp[i] = generate_gmm(batch.pairs[i].response, resp_weights);
    }
    std::vector<double> kl(b * b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) kl[i * b + j] = gmm_kl_approx(resp[j], ctx[i]).total;
    NpairLoss out;
    out.per_pair = npair_loss_from_kl(kl, b);
    for (double v : out.per_pair) out.loss += v;
    out.loss /= static_cast<double>(b);
    return out;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Gradient buffers mirroring ParamGenWeights.
struct ParamGenGrads {
    std::vector<double> seeds;
    std::vector<double> w_mean, b_mean;
    std::vector<double> w_logvar, b_logvar;

    explicit ParamGenGrads(const ParamGenWeights& w)
        : seeds(w.seeds.size(), 0.0),
          w_mean(w.map_mean.weight.size(), 0.0),
          b_mean(w.map_mean.bias.size(), 0.0),
          w_logvar(w.map_logvar.weight.size(), 0.0),
          b_logvar(w.map_logvar.bias.size(), 0.0) {}
};

struct LossGradients {
    double loss = 0.0;
    std::vector<double> per_pair;
    ParamGenGrads ctx;
    ParamGenGrads resp;
};

namespace detail {

/// Backpropagate GMM-parameter gradients (d_mu, d_lv over K x d) through one
/// generator forward pass. Gradients stop at the token matrix; tokens are
/// fixed inputs.
inline void backprop_generator(const GenForward& f, const TokenMatrix& X, const ParamGenWeights& w,
                               const std::vector<double>& d_mu, std::vector<double> d_lv,
                               ParamGenGrads& grads) {
    const std::size_t K = f.att.components;
    const std::size_t d = f.att.dim;
    const std::size_t m = X.tokens;
    // Clamped log-var coordinates pass no gradient.
    for (std::size_t i = 0; i < d_lv.size(); ++i)
        if (f.clamped[i]) d_lv[i] = 0.0;

    std::vector<double> d_attended(K * d, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        std::span<const double> a = f.att.attended_row(k);
        const double* gmu = d_mu.data() + k * d;
        const double* glv = d_lv.data() + k * d;
        double* da = d_attended.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) {
            const double gm = gmu[j];
            const double gl = glv[j];
            if (gm != 0.0) {
                grads.b_mean[j] += gm;
                double* wrow = grads.w_mean.data() + j * d;
                const double* w1row = w.map_mean.weight.data() + j * d;
                for (std::size_t l = 0; l < d; ++l) {
                    wrow[l] += gm * a[l];
                    da[l] += gm * w1row[l];
                }
            }
            if (gl != 0.0) {
                grads.b_logvar[j] += gl;
                double* wrow = grads.w_logvar.data() + j * d;
                const double* w2row = w.map_logvar.weight.data() + j * d;
                for (std::size_t l = 0; l < d; ++l) {
                    wrow[l] += gl * a[l];
                    da[l] += gl * w2row[l];
                }
            }
        }
    }
    if (w.per_input_components()) return;  // identity assignment, no seeds

    // Attention backward: a_k = sum_i alpha_ik x_i with alpha_.k a softmax
    // over logits z_ik = x_i . e_k.
    std::vector<double> d_alpha(m);
    for (std::size_t k = 0; k < K; ++k) {
        const double* da = d_attended.data() + k * d;
        double weighted_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            std::span<const double> x = X.row(i);
            double g = 0.0;
            for (std::size_t j = 0; j < d; ++j) g += da[j] * x[j];
            d_alpha[i] = g;
            weighted_sum += f.att.alpha(i, k) * g;
        }
        double* ge = grads.seeds.data() + k * d;
        for (std::size_t i = 0; i < m; ++i) {
            const double gz = f.att.alpha(i, k) * (d_alpha[i] - weighted_sum);
            if (gz == 0.0) continue;
            std::span<const double> x = X.row(i);
            for (std::size_t j = 0; j < d; ++j) ge[j] += gz * x[j];
        }
    }
}

}  // namespace detail

/**
 * Analytic gradients of npair_loss with respect to every trainable tensor of
 * both generators. The min over context components passes gradient only
 * through the selected component (lowest index at ties), the log-var clamp
 * zeroes gradients where active, and accumulation runs in a fixed pair order
 * so results are reproducible.
 */
inline LossGradients loss_gradients(const Batch& batch, const ParamGenWeights& ctx_weights,
                                    const ParamGenWeights& resp_weights) {
    batch.validate();
    const std::size_t b = batch.size();
    std::vector<detail::GenForward> fc(b), fr(b);
    for (std::size_t i = 0; i < b; ++i) {
        fc[i] = detail::forward_gmm(batch.pairs[i].context, ctx_weights);
        fr[i] = detail::forward_gmm(batch.pairs[i].response, resp_weights);
    }
    std::vector<double> kl(b * b);
    std::vector<std::vector<std::pair<std::size_t, double>>> match(b * b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            KlBreakdown br = gmm_kl_approx(fr[j].gmm, fc[i].gmm);
            kl[i * b + j] = br.total;
            match[i * b + j] = std::move(br.per_response_component);
        }

    LossGradients out{0.0, npair_loss_from_kl(kl, b), ParamGenGrads(ctx_weights), ParamGenGrads(resp_weights)};
    for (double v : out.per_pair) out.loss += v;
    out.loss /= static_cast<double>(b);

    // d loss / d kl_ij = (delta_ij - p_ij) / B with p the row-i softmax of -kl.
    std::vector<double> d_kl(b * b);
    for (std::size_t i = 0; i < b; ++i) {
        double min_kl = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b; ++j) min_kl = std::min(min_kl, kl[i * b + j]);
        double norm = 0.0;
        for (std::size_t j = 0; j < b; ++j) norm += std::exp(min_kl - kl[i * b + j]);
        for (std::size_t j = 0; j < b; ++j) {
            const double p = std::exp(min_kl - kl[i * b + j]) / norm;
            d_kl[i * b + j] = ((i == j ? 1.0 : 0.0) - p) / static_cast<double>(b);
        }
    }

    // GMM-parameter gradients per pair, accumulated over all matrix cells.
    const std::size_t d = batch.pairs.front().context.dim;
    std::vector<std::vector<double>> dmu_ctx(b), dlv_ctx(b), dmu_resp(b), dlv_resp(b);
    for (std::size_t i = 0; i < b; ++i) {
        dmu_ctx[i].assign(fc[i].gmm.components * d, 0.0);
        dlv_ctx[i].assign(fc[i].gmm.components * d, 0.0);
        dmu_resp[i].assign(fr[i].gmm.components * d, 0.0);
        dlv_resp[i].assign(fr[i].gmm.components * d, 0.0);
    }
    for (std::size_t i = 0; i < b; ++i) {
        const GmmEmbedding& cg = fc[i].gmm;
        for (std::size_t j = 0; j < b; ++j) {
            const GmmEmbedding& rg = fr[j].gmm;
            const double coef = d_kl[i * b + j] / static_cast<double>(rg.components);
            const auto& sel = match[i * b + j];
            for (std::size_t l = 0; l < rg.components; ++l) {
                const std::size_t ks = sel[l].first;
                const double* mr = rg.means.data() + l * d;
                const double* lr = rg.log_vars.data() + l * d;
                const double* mc = cg.means.data() + ks * d;
                const double* lc = cg.log_vars.data() + ks * d;
                double* gmr = dmu_resp[j].data() + l * d;
                double* glr = dlv_resp[j].data() + l * d;
                double* gmc = dmu_ctx[i].data() + ks * d;
                double* glc = dlv_ctx[i].data() + ks * d;
                for (std::size_t jj = 0; jj < d; ++jj) {
                    const double delta = mr[jj] - mc[jj];
                    const double elc = std::exp(-lc[jj]);
                    const double ratio = std::exp(lr[jj] - lc[jj]);
                    const double g_mu = coef * delta * elc;
                    gmr[jj] += g_mu;
                    gmc[jj] -= g_mu;
                    glr[jj] += coef * 0.5 * (ratio - 1.0);
                    glc[jj] += coef * 0.5 * (1.0 - ratio - delta * delta * elc);
                }
            }
        }
    }
    for (std::size_t i = 0; i < b; ++i) {
        detail::backprop_generator(fc[i], batch.pairs[i].context, ctx_weights, dmu_ctx[i],
                                   std::move(dlv_ctx[i]), out.ctx);
        detail::backprop_generator(fr[i], batch.pairs[i].response, resp_weights, dmu_resp[i],
                                   std::move(dlv_resp[i]), out.resp);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer and training loop
// ---------------------------------------------------------------------------

/// Adam with decoupled weight decay over a fixed list of tensors.
class AdamW {
  public:
    AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    void step(std::vector<std::span<double>> params, std::vector<std::span<const double>> grads) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.size(), 0.0);
                v_.emplace_back(p.size(), 0.0);
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t tensor = 0; tensor < params.size(); ++tensor) {
            std::span<double> p = params[tensor];
            std::span<const double> g = grads[tensor];
            std::vector<double>& m = m_[tensor];
            std::vector<double>& v = v_[tensor];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
                const double mh = m[i] / bc1;
                const double vh = v[i] / bc2;
                p[i] -= lr_ * (mh / (std::sqrt(vh) + eps_) + weight_decay_ * p[i]);
            }
        }
    }

  private:
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

inline std::vector<std::span<double>> trainable_tensors(ParamGenWeights& w) {
    return {std::span<double>(w.seeds), std::span<double>(w.map_mean.weight),
            std::span<double>(w.map_mean.bias), std::span<double>(w.map_logvar.weight),
            std::span<double>(w.map_logvar.bias)};
}

inline std::vector<std::span<const double>> grad_tensors(const ParamGenGrads& g) {
    return {std::span<const double>(g.seeds), std::span<const double>(g.w_mean),
            std::span<const double>(g.b_mean), std::span<const double>(g.w_logvar),
            std::span<const double>(g.b_logvar)};
}

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ParamGenWeights ctx_weights;
    ParamGenWeights resp_weights;
    std::vector<EpochStats> history;
};

/// Loss history in the CSV layout written by the CLI.
inline std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_loss\n";
    char buf[96];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss);
        out += buf;
    }
    return out;
}

/**
 * Train context/response generators on text pairs with AdamW, seeded
 * shuffling, a deterministic validation split and early stopping on the
 * validation loss. Returns the weights of the best validation epoch.
 *
 * Both sides are embedded with the hashing embedder at config.dim using
 * config.seed, so a (corpus, config) pair fully determines the trajectory.
 */
inline TrainResult train(const std::vector<PairItem>& corpus, const TrainConfig& config) {
    config.validate();
    if (corpus.empty()) throw InvalidArgument("train: empty corpus");

    std::vector<BatchPair> embedded(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        embedded[i].context = hash_embed(corpus[i].context, config.dim, config.seed);
        embedded[i].response = hash_embed(corpus[i].response, config.dim, config.seed);
    }

    Rng rng(mix64(config.seed));
    ParamGenWeights ctx_w = init_param_gen(config.k_ctx, config.dim, rng);
    ParamGenWeights resp_w = init_param_gen(config.k_resp, config.dim, rng);

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t n_val = std::max<std::size_t>(2, static_cast<std::size_t>(
                                                     static_cast<double>(corpus.size()) * config.val_fraction));
    if (corpus.size() < n_val + 2) throw InvalidArgument("train: corpus too small to split (need >= 4 pairs)");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    auto run_batches = [&](const std::vector<std::size_t>& idx, bool update, AdamW* opt_ctx,
                           AdamW* opt_resp) -> double {
        double loss_sum = 0.0;
        std::size_t n_seen = 0;
        for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
            const std::size_t end = std::min(idx.size(), start + config.batch_size);
            if (end - start < 2) break;  // tail too small for in-batch negatives
            Batch batch;
            batch.pairs.reserve(end - start);
            for (std::size_t p = start; p < end; ++p) batch.pairs.push_back(embedded[idx[p]]);
            if (update) {
                LossGradients g = loss_gradients(batch, ctx_w, resp_w);
                if (!config.use_bias) {
                    std::fill(g.ctx.b_mean.begin(), g.ctx.b_mean.end(), 0.0);
                    std::fill(g.ctx.b_logvar.begin(), g.ctx.b_logvar.end(), 0.0);
                    std::fill(g.resp.b_mean.begin(), g.resp.b_mean.end(), 0.0);
                    std::fill(g.resp.b_logvar.begin(), g.resp.b_logvar.end(), 0.0);
                }
                opt_ctx->step(trainable_tensors(ctx_w), grad_tensors(g.ctx));
                opt_resp->step(trainable_tensors(resp_w), grad_tensors(g.resp));
                loss_sum += g.loss * static_cast<double>(batch.size());
            } else {
                loss_sum += npair_loss(batch, ctx_w, resp_w).loss * static_cast<double>(batch.size());
            }
            n_seen += batch.size();
        }
        return n_seen == 0 ? 0.0 : loss_sum / static_cast<double>(n_seen);
    };

    AdamW opt_ctx(config.lr, config.beta1, config.beta2, config.adam_eps, config.weight_decay);
    AdamW opt_resp(config.lr, config.beta1, config.beta2, config.adam_eps, config.weight_decay);

    TrainResult result;
    result.ctx_weights = ctx_w;
    result.resp_weights = resp_w;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stale_evals = 0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        const double train_loss = run_batches(train_idx, true, &opt_ctx, &opt_resp);
        const double val_loss = run_batches(val_idx, false, nullptr, nullptr);
        result.history.push_back({epoch, train_loss, val_loss});
        if (val_loss < best_val) {
            best_val = val_loss;
            result.ctx_weights = ctx_w;
            result.resp_weights = resp_w;
            stale_evals = 0;
        } else if (++stale_evals >= config.patience) {
            break;
        }
    }
    return result;
}

}  // namespace gme
