#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gme/error.hpp"
#include "gme/rng.hpp"
#include "gme/types.hpp"

namespace gme {

/**
 * Synthetic one-to-many corpus generator.
 *
 * Every topic owns `responses_per_context` response sub-clusters, each with a
 * fixed word phrase. A context mentions all of its topic's sub-cluster
 * phrases (its aspects) plus a few per-context salt words; each linked
 * response covers exactly one aspect: the sub-cluster phrase plus the
 * context's salt words, each echoed independently with probability `noise`.
 * noise = 0 therefore makes all responses of a sub-cluster identical, while
 * noise > 0 lets a retriever identify the paired response among sub-cluster
 * twins through the echoed salt.
 */
struct SynthConfig {
    std::size_t n_topics = 8;
    std::size_t responses_per_context = 4;
    double noise = 0.0;
    std::uint64_t seed = 1;
    std::size_t contexts_per_topic = 25;
    std::size_t topic_words = 2;
    std::size_t subcluster_words = 2;
    std::size_t salt_words = 2;
};

struct SynthPair {
    std::string id;
    std::string context;
    std::string response;
    std::uint32_t topic = 0;
    std::uint32_t subcluster = 0;
};

inline std::vector<SynthPair> synth_corpus(const SynthConfig& cfg) {
    if (cfg.n_topics < 1 || cfg.responses_per_context < 1 || cfg.contexts_per_topic < 1)
        throw InvalidArgument("synth_corpus: counts must be >= 1");
    if (cfg.noise < 0.0 || cfg.noise > 1.0) throw InvalidArgument("synth_corpus: noise must be in [0, 1]");
    Rng rng(mix64(cfg.seed));
    std::vector<SynthPair> pairs;
    pairs.reserve(cfg.n_topics * cfg.contexts_per_topic * cfg.responses_per_context);
    for (std::size_t t = 0; t < cfg.n_topics; ++t) {
        std::string topic_phrase;
        for (std::size_t wi = 0; wi < cfg.topic_words; ++wi)
            topic_phrase += "top" + std::to_string(t) + "w" + std::to_string(wi) + " ";
        std::vector<std::string> sub_phrases(cfg.responses_per_context);
        for (std::size_t s = 0; s < cfg.responses_per_context; ++s)
            for (std::size_t wi = 0; wi < cfg.subcluster_words; ++wi)
                sub_phrases[s] += "sub" + std::to_string(t) + "c" + std::to_string(s) + "w" +
                                  std::to_string(wi) + " ";
        for (std::size_t j = 0; j < cfg.contexts_per_topic; ++j) {
            std::vector<std::string> salt(cfg.salt_words);
            for (std::size_t wi = 0; wi < cfg.salt_words; ++wi)
                salt[wi] = "salt" + std::to_string(t) + "x" + std::to_string(j) + "w" + std::to_string(wi);
            std::string context = topic_phrase;
            for (const std::string& sub : sub_phrases) context += sub;
            for (const std::string& w : salt) context += w + " ";
            context.pop_back();
            for (std::size_t s = 0; s < cfg.responses_per_context; ++s) {
                std::string response = sub_phrases[s];
                for (const std::string& w : salt)
                    if (rng.uniform() < cfg.noise) response += w + " ";
                response.pop_back();
                SynthPair p;
                p.id = "p" + std::to_string(t) + "_" + std::to_string(j) + "_" + std::to_string(s);
                p.context = context;
                p.response = response;
                p.topic = static_cast<std::uint32_t>(t);
                p.subcluster = static_cast<std::uint32_t>(s);
                pairs.push_back(std::move(p));
            }
        }
    }
    return pairs;
}

}  // namespace gme
