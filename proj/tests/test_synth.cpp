#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "gme/synth.hpp"

using namespace gme;

TEST_CASE("noise zero makes sub-cluster responses identical") {
    SynthConfig cfg;
    cfg.n_topics = 3;
    cfg.responses_per_context = 2;
    cfg.contexts_per_topic = 5;
    cfg.noise = 0.0;
    cfg.seed = 1;
    auto pairs = synth_corpus(cfg);
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::set<std::string>> responses;
    for (const SynthPair& p : pairs) responses[{p.topic, p.subcluster}].insert(p.response);
    for (const auto& [key, texts] : responses) REQUIRE(texts.size() == 1);
}

TEST_CASE("a single topic covers every pair") {
    SynthConfig cfg;
    cfg.n_topics = 1;
    cfg.responses_per_context = 3;
    cfg.contexts_per_topic = 4;
    cfg.noise = 0.5;
    auto pairs = synth_corpus(cfg);
    REQUIRE(pairs.size() == 12);
    for (const SynthPair& p : pairs) REQUIRE(p.topic == 0);
}

TEST_CASE("label audit: context and response words carry the recorded topic") {
    SynthConfig cfg;
    cfg.n_topics = 4;
    cfg.responses_per_context = 3;
    cfg.contexts_per_topic = 3;
    cfg.noise = 1.0;
    cfg.seed = 9;
    auto pairs = synth_corpus(cfg);
    REQUIRE(pairs.size() == 4 * 3 * 3);
    std::set<std::string> ids;
    for (const SynthPair& p : pairs) {
        REQUIRE(ids.insert(p.id).second);  // unique ids
        const std::string topic_tag = "top" + std::to_string(p.topic) + "w0";
        REQUIRE(p.context.find(topic_tag) != std::string::npos);
        const std::string sub_tag = "sub" + std::to_string(p.topic) + "c" + std::to_string(p.subcluster);
        REQUIRE(p.response.find(sub_tag) != std::string::npos);
        REQUIRE(p.subcluster < cfg.responses_per_context);
    }
}

TEST_CASE("generation is deterministic by seed") {
    SynthConfig cfg;
    cfg.n_topics = 2;
    cfg.responses_per_context = 2;
    cfg.contexts_per_topic = 3;
    cfg.noise = 0.7;
    cfg.seed = 5;
    auto a = synth_corpus(cfg);
    auto b = synth_corpus(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].id == b[i].id);
        REQUIRE(a[i].context == b[i].context);
        REQUIRE(a[i].response == b[i].response);
    }
    cfg.seed = 6;
    auto c = synth_corpus(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i].response != c[i].response;
    REQUIRE(any_diff);
}

TEST_CASE("full echo links every salt word into the paired response") {
    SynthConfig cfg;
    cfg.n_topics = 2;
    cfg.responses_per_context = 2;
    cfg.contexts_per_topic = 2;
    cfg.salt_words = 2;
    cfg.noise = 1.0;
    auto pairs = synth_corpus(cfg);
    for (const SynthPair& p : pairs) {
        // at noise=1 the response carries the full salt suffix of its context
        const std::size_t salt_pos = p.context.find("salt");
        REQUIRE(salt_pos != std::string::npos);
        REQUIRE(p.response.find(p.context.substr(salt_pos)) != std::string::npos);
    }
}
