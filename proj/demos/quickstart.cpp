// Minimal end-to-end walk through the library API: generate a toy corpus,
// train small one- and four-component models, index the responses, and
// compare retrieval quality.

#include <cstdio>
#include <vector>

#include "gme/gme.hpp"

int main() {
    gme::SynthConfig scfg;
    scfg.n_topics = 6;
    scfg.responses_per_context = 4;
    scfg.contexts_per_topic = 12;
    scfg.noise = 0.8;
    scfg.seed = 7;
    const auto corpus = gme::synth_corpus(scfg);
    std::printf("corpus: %zu context-response pairs\n", corpus.size());

    std::vector<gme::PairItem> pairs;
    for (const auto& p : corpus) pairs.push_back({p.id, p.context, p.response});

    gme::TrainConfig cfg;
    cfg.dim = 16;
    cfg.k_ctx = cfg.k_resp = 4;
    cfg.lr = 0.01;
    cfg.batch_size = 16;
    cfg.max_epochs = 8;
    cfg.patience = 8;
    cfg.seed = 7;
    const gme::TrainResult model = gme::train(pairs, cfg);
    std::printf("trained %zu epochs, final val loss %.4f\n", model.history.size(),
                model.history.back().val_loss);

    std::vector<gme::GmmRecord> records;
    for (const auto& p : pairs)
        records.push_back({p.id, gme::generate_gmm(gme::hash_embed(p.response, cfg.dim, cfg.seed),
                                                   model.resp_weights)});
    const gme::GmmIndex index = gme::GmmIndex::build(records, 0, 0, cfg.seed);
    std::printf("index: %zu responses in %zu cells\n", index.size(), index.cells());

    int hits = 0;
    for (std::size_t i = 0; i < pairs.size(); i += 7) {
        const auto ctx = gme::generate_gmm(gme::hash_embed(pairs[i].context, cfg.dim, cfg.seed),
                                           model.ctx_weights);
        const auto top = index.query(ctx, 10, 5);
        std::vector<std::string> ranked;
        for (const auto& c : top) ranked.push_back(c.id);
        hits += gme::recall_at_k(ranked, pairs[i].id, 5);
    }
    std::printf("recall@5 on sampled queries: %d/%zu\n", hits, (pairs.size() + 6) / 7);
    return 0;
}
