// gme: Gaussian-mixture embedding retrieval toolkit.
//
// Subcommands cover the full pipeline: synth (toy corpora), train, embed,
// index build/query, eval, bench. Every subcommand is deterministic given its
// flags and --seed. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 internal error.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gme/gme.hpp"

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

gme::ParamGenWeights load_weights(const std::string& path) {
    return gme::deserialize_weights(gme::read_file(path));
}

struct EmbedArgs {
    std::string input, weights, out, side = "resp";
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

void run_embed(const EmbedArgs& a) {
    const gme::ParamGenWeights weights = load_weights(a.weights);
    const std::vector<std::string> fields =
        a.side == "ctx" ? std::vector<std::string>{"context", "text"}
                        : std::vector<std::string>{"response", "text"};
    const auto items = gme::read_corpus_items(a.input, fields);
    if (items.empty()) throw gme::InvalidArgument("empty corpus: " + a.input);

    std::vector<gme::GmmRecord> records(items.size());
    std::set<std::string> ids;
    for (const auto& item : items)
        if (!ids.insert(item.id).second)
            throw gme::InvalidArgument("duplicate corpus id '" + item.id + "'");
    gme::parallel_for(items.size(), a.threads, [&](std::size_t i) {
        const gme::CorpusItem& item = items[i];
        gme::TokenMatrix tokens;
        if (item.tokens) {
            tokens = *item.tokens;
            if (tokens.dim != weights.dim)
                throw gme::DimensionError("embedded tokens of '" + item.id + "' do not match weights dim");
        } else {
            tokens = gme::hash_embed(*item.text, weights.dim, a.seed);
        }
        records[i] = {item.id, gme::generate_gmm(tokens, weights)};
    });
    gme::write_file(a.out, gme::serialize_gmm_records(records));
    std::cerr << "embedded " << records.size() << " records -> " << a.out << "\n";
}

struct TrainArgs {
    std::string pairs, config, out_dir;
};

void run_train(const TrainArgs& a) {
    const auto pairs = gme::read_pairs(a.pairs);
    std::ifstream cfg_in(a.config);
    if (!cfg_in) throw gme::IoError("cannot open " + a.config);
    std::string cfg_text((std::istreambuf_iterator<char>(cfg_in)), std::istreambuf_iterator<char>());
    const gme::TrainConfig cfg = gme::parse_train_config(cfg_text);

    std::cerr << "training on " << pairs.size() << " pairs (dim=" << cfg.dim << ", K_ctx="
              << (cfg.k_ctx == 0 ? std::string("all") : std::to_string(cfg.k_ctx)) << ", K_resp="
              << (cfg.k_resp == 0 ? std::string("all") : std::to_string(cfg.k_resp)) << ")\n";
    const gme::TrainResult result = gme::train(pairs, cfg);

    std::filesystem::create_directories(a.out_dir);
    gme::write_file(a.out_dir + "/ctx.pgw", gme::serialize_weights(result.ctx_weights));
    gme::write_file(a.out_dir + "/resp.pgw", gme::serialize_weights(result.resp_weights));
    gme::write_text_file(a.out_dir + "/loss.csv", gme::history_to_csv(result.history));
    for (const gme::EpochStats& e : result.history)
        std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << "\n";
    std::cerr << "wrote " << a.out_dir << "/{ctx.pgw,resp.pgw,loss.csv}\n";
}

struct IndexBuildArgs {
    std::string gmms, out;
    std::size_t cells = 0, nprobe = 0;
    std::uint64_t seed = 1;
};

void run_index_build(const IndexBuildArgs& a) {
    const auto records = gme::deserialize_gmm_records(gme::read_file(a.gmms));
    if (records.empty()) throw gme::InvalidArgument("empty embedding file: " + a.gmms);
    gme::GmmIndex idx = gme::GmmIndex::build(records, a.cells, a.nprobe, a.seed);
    gme::write_file(a.out, idx.save());
    std::cerr << "indexed " << idx.size() << " responses, " << idx.total_entries() << " component means, "
              << idx.cells() << " cells (n_probe " << idx.n_probe() << ") -> " << a.out << "\n";
}

struct IndexQueryArgs {
    std::string index, context_text, context_gmm, weights;
    std::size_t top_m = 10, per_component_k = 10, nprobe = 0;
    std::uint64_t seed = 1;
};

void run_index_query(const IndexQueryArgs& a) {
    const gme::GmmIndex idx = gme::GmmIndex::load(gme::read_file(a.index));
    gme::GmmEmbedding ctx;
    if (!a.context_gmm.empty()) {
        // accept a bare embedding or a single-record embedding stream
        const auto bytes = gme::read_file(a.context_gmm);
        if (bytes.size() >= 4 && std::memcmp(bytes.data(), gme::kRecordsMagic, 4) == 0) {
            const auto records = gme::deserialize_gmm_records(bytes);
            if (records.size() != 1)
                throw gme::InvalidArgument("--context-gmm stream must hold exactly one record, got " +
                                           std::to_string(records.size()));
            ctx = records.front().gmm;
        } else {
            ctx = gme::deserialize_gmm(bytes);
        }
    } else {
        const gme::ParamGenWeights w = load_weights(a.weights);
        ctx = gme::generate_gmm(gme::hash_embed(a.context_text, w.dim, a.seed), w);
    }
    const auto results = idx.query(ctx, a.per_component_k, a.top_m, a.nprobe);
    for (std::size_t r = 0; r < results.size(); ++r)
        std::cout << (r + 1) << "\t" << results[r].id << "\t" << fmt("%.9g", results[r].score) << "\n";
}

struct EvalArgs {
    std::string index, pairs, weights, out_csv;
    std::string k_list = "1,5,10";
    std::string metrics = "recall,mrr,bleu,diversity";
    std::size_t top_m = 0, per_component_k = 10;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

void run_eval(const EvalArgs& a) {
    const gme::GmmIndex idx = gme::GmmIndex::load(gme::read_file(a.index));
    const auto pairs = gme::read_pairs(a.pairs);
    if (pairs.empty()) throw gme::InvalidArgument("empty pairs file: " + a.pairs);
    const gme::ParamGenWeights ctx_w = load_weights(a.weights);

    std::vector<std::size_t> ks;
    for (const auto& part : CLI::detail::split(a.k_list, ','))
        ks.push_back(static_cast<std::size_t>(std::stoull(part)));
    std::set<std::string> wanted;
    for (const auto& part : CLI::detail::split(a.metrics, ',')) wanted.insert(part);

    std::size_t top_m = a.top_m;
    if (top_m == 0) {
        top_m = 10;
        for (std::size_t k : ks) top_m = std::max(top_m, k);
    }

    std::map<std::string, const gme::PairItem*> by_id;
    for (const auto& p : pairs) by_id[p.id] = &p;

    struct PerQuery {
        std::vector<int> hits;  // one per k
        double rr = 0.0;
        double bleu2 = 0.0, bleu4 = 0.0;
        double div = 0.0;
    };
    std::vector<PerQuery> rows(pairs.size());
    gme::parallel_for(pairs.size(), a.threads, [&](std::size_t i) {
        const gme::PairItem& p = pairs[i];
        const gme::GmmEmbedding ctx = gme::generate_gmm(gme::hash_embed(p.context, ctx_w.dim, a.seed), ctx_w);
        const auto scored = idx.query(ctx, a.per_component_k, top_m);
        std::vector<std::string> ranked;
        ranked.reserve(scored.size());
        for (const auto& c : scored) ranked.push_back(c.id);
        PerQuery& row = rows[i];
        for (std::size_t k : ks) row.hits.push_back(gme::recall_at_k(ranked, p.id, k));
        row.rr = gme::mrr(ranked, p.id);
        if (!ranked.empty()) {
            auto truth_tokens = gme::tokenize(p.response);
            auto it = by_id.find(ranked.front());
            if (it != by_id.end()) {
                auto top_tokens = gme::tokenize(it->second->response);
                row.bleu2 = gme::bleu(top_tokens, truth_tokens, 2);
                row.bleu4 = gme::bleu(top_tokens, truth_tokens, 4);
            }
            std::vector<std::vector<double>> pooled;
            for (std::size_t r = 0; r < std::min<std::size_t>(10, ranked.size()); ++r) {
                auto it2 = by_id.find(ranked[r]);
                if (it2 != by_id.end())
                    pooled.push_back(gme::mean_pool(gme::hash_embed(it2->second->response, ctx_w.dim, a.seed)));
            }
            row.div = gme::diversity(pooled);
        }
    });

    std::vector<std::pair<std::string, double>> table;
    if (wanted.count("recall"))
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            std::vector<int> hits;
            for (const auto& r : rows) hits.push_back(r.hits[ki]);
            table.emplace_back("recall@" + std::to_string(ks[ki]), gme::recall_at_k_percent(hits));
        }
    auto column = [&](double PerQuery::* field) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.*field);
        return gme::mean(v);
    };
    if (wanted.count("mrr")) table.emplace_back("mrr", column(&PerQuery::rr));
    if (wanted.count("bleu")) {
        table.emplace_back("bleu2", column(&PerQuery::bleu2));
        table.emplace_back("bleu4", column(&PerQuery::bleu4));
    }
    if (wanted.count("diversity")) table.emplace_back("diversity", column(&PerQuery::div));

    std::string csv = "metric,value\n";
    for (const auto& [name, value] : table) csv += name + "," + fmt("%.9g", value) + "\n";
    if (!a.out_csv.empty()) gme::write_text_file(a.out_csv, csv);

    std::printf("%-12s %12s\n", "metric", "value");
    for (const auto& [name, value] : table) std::printf("%-12s %12.6g\n", name.c_str(), value);
}

struct BenchArgs {
    std::size_t items = 10000, queries = 50, k_components = 4, dim = 16;
    std::string backends = "single,maxsim,gmm_index,gmm_scan";
    std::uint64_t seed = 1;
};

void run_bench(const BenchArgs& a) {
    if (a.items < 1) throw gme::InvalidArgument("bench: need at least one item");
    // synthetic corpus sized to --items
    gme::SynthConfig scfg;
    scfg.n_topics = std::max<std::size_t>(1, a.items / 100);
    scfg.responses_per_context = 4;
    scfg.contexts_per_topic =
        (a.items + scfg.n_topics * scfg.responses_per_context - 1) / (scfg.n_topics * scfg.responses_per_context);
    scfg.noise = 0.8;
    scfg.seed = a.seed;
    auto pairs = gme::synth_corpus(scfg);
    pairs.resize(a.items);

    gme::Rng rng(gme::mix64(a.seed));
    const gme::ParamGenWeights ctx_w = gme::init_param_gen(a.k_components, a.dim, rng);
    const gme::ParamGenWeights resp_w = gme::init_param_gen(a.k_components, a.dim, rng);

    std::vector<gme::TokenMatrix> item_tokens(pairs.size());
    std::vector<std::vector<double>> item_pooled(pairs.size());
    std::vector<gme::GmmRecord> item_gmms(pairs.size());
    std::vector<gme::GmmEmbedding> scan_gmms(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        item_tokens[i] = gme::hash_embed(pairs[i].response, a.dim, a.seed);
        item_pooled[i] = gme::mean_pool(item_tokens[i]);
        item_gmms[i] = {pairs[i].id, gme::generate_gmm(item_tokens[i], resp_w)};
        scan_gmms[i] = gme::quantize_f32(item_gmms[i].gmm);
    }
    std::cerr << "building index over " << pairs.size() << " items\n";
    const gme::GmmIndex idx = gme::GmmIndex::build(item_gmms, 0, 0, a.seed);

    std::vector<gme::TokenMatrix> query_tokens(a.queries);
    std::vector<std::vector<double>> query_pooled(a.queries);
    std::vector<gme::GmmEmbedding> query_gmms(a.queries);
    for (std::size_t q = 0; q < a.queries; ++q) {
        const auto& p = pairs[rng.uniform_int(pairs.size())];
        query_tokens[q] = gme::hash_embed(p.context, a.dim, a.seed);
        query_pooled[q] = gme::mean_pool(query_tokens[q]);
        query_gmms[q] = gme::generate_gmm(query_tokens[q], ctx_w);
    }

    std::set<std::string> wanted;
    for (const auto& part : CLI::detail::split(a.backends, ',')) wanted.insert(part);
    volatile std::size_t sink = 0;
    std::printf("%-10s %12s %12s\n", "backend", "mean_ms", "p95_ms");
    auto report = [&](const char* name, const gme::LatencyStats& st) {
        std::printf("%-10s %12.4f %12.4f\n", name, st.mean_ms, st.p95_ms);
    };
    if (wanted.count("single"))
        report("single", gme::measure_latency(
                             [&](std::size_t q) { sink = sink + gme::rank_by_dot(item_pooled, query_pooled[q], 10).size(); },
                             a.queries));
    if (wanted.count("maxsim"))
        report("maxsim", gme::measure_latency(
                             [&](std::size_t q) { sink = sink + gme::rank_by_maxsim(item_tokens, query_tokens[q], 10).size(); },
                             a.queries));
    if (wanted.count("gmm_index"))
        report("gmm_index", gme::measure_latency(
                                [&](std::size_t q) { sink = sink + idx.query(query_gmms[q], 10, 10).size(); }, a.queries));
    if (wanted.count("gmm_scan"))
        report("gmm_scan", gme::measure_latency(
                               [&](std::size_t q) { sink = sink + gme::rank_by_gmm_scan(scan_gmms, query_gmms[q], 10).size(); },
                               a.queries));
}

struct SynthArgs {
    std::string out;
    std::size_t topics = 8, contexts_per_topic = 25, responses_per_context = 4;
    double noise = 0.8;
    std::uint64_t seed = 1;
};

void run_synth(const SynthArgs& a) {
    gme::SynthConfig cfg;
    cfg.n_topics = a.topics;
    cfg.contexts_per_topic = a.contexts_per_topic;
    cfg.responses_per_context = a.responses_per_context;
    cfg.noise = a.noise;
    cfg.seed = a.seed;
    const auto pairs = gme::synth_corpus(cfg);
    std::vector<gme::PairItem> items;
    items.reserve(pairs.size());
    for (const auto& p : pairs) items.push_back({p.id, p.context, p.response});
    gme::write_text_file(a.out, gme::pairs_to_jsonl(items));
    std::cerr << "wrote " << items.size() << " pairs -> " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-mixture embedding retrieval toolkit"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic one-to-many corpus");
    synth->add_option("--out", synth_args.out, "output pairs file (jsonl)")->required();
    synth->add_option("--topics", synth_args.topics, "number of topics");
    synth->add_option("--contexts-per-topic", synth_args.contexts_per_topic, "contexts per topic");
    synth->add_option("--responses-per-context", synth_args.responses_per_context, "linked responses per context");
    synth->add_option("--noise", synth_args.noise, "salt echo probability in [0,1]");
    synth->add_option("--seed", synth_args.seed, "generator seed");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train context/response generators");
    train->add_option("--pairs", train_args.pairs, "training pairs (jsonl)")->required();
    train->add_option("--config", train_args.config, "flat key=value config file")->required();
    train->add_option("--out", train_args.out_dir, "output directory for weights and loss CSV")->required();

    EmbedArgs embed_args;
    CLI::App* embed = app.add_subcommand("embed", "embed a corpus into binary GMM records");
    embed->add_option("--input", embed_args.input, "corpus file (jsonl)")->required();
    embed->add_option("--weights", embed_args.weights, "generator weights (.pgw)")->required();
    embed->add_option("--out", embed_args.out, "output records file")->required();
    embed->add_option("--side", embed_args.side, "which text field to embed")
        ->check(CLI::IsMember({"ctx", "resp"}))
        ->required();
    embed->add_option("--seed", embed_args.seed, "hashing embedder seed");
    embed->add_option("--threads", embed_args.threads, "worker threads");

    CLI::App* index = app.add_subcommand("index", "inverted-file index operations");
    index->require_subcommand(1);
    IndexBuildArgs ib_args;
    CLI::App* ib = index->add_subcommand("build", "build an index from embedded records");
    ib->add_option("--gmms", ib_args.gmms, "embedding records file")->required();
    ib->add_option("--out", ib_args.out, "output index file")->required();
    ib->add_option("--cells", ib_args.cells, "coarse cells (0 = sqrt heuristic)");
    ib->add_option("--nprobe", ib_args.nprobe, "cells probed per query (0 = cells/16)");
    ib->add_option("--seed", ib_args.seed, "k-means seed");

    IndexQueryArgs iq_args;
    CLI::App* iq = index->add_subcommand("query", "query an index");
    iq->add_option("--index", iq_args.index, "index file")->required();
    auto* ctx_group = iq->add_option_group("context", "query context");
    CLI::Option* opt_text = ctx_group->add_option("--context-text", iq_args.context_text, "context as raw text");
    ctx_group->add_option("--context-gmm", iq_args.context_gmm, "context as a serialized embedding file");
    ctx_group->require_option(1);
    iq->add_option("--weights", iq_args.weights, "context generator weights (required with --context-text)")
        ->needs(opt_text);
    iq->add_option("--top-m", iq_args.top_m, "results to return")->check(CLI::PositiveNumber);
    iq->add_option("--per-component-k", iq_args.per_component_k, "pre-retrieved means per context component")
        ->check(CLI::PositiveNumber);
    iq->add_option("--nprobe", iq_args.nprobe, "probe override (0 = index default)");
    iq->add_option("--seed", iq_args.seed, "hashing embedder seed");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "retrieval metrics over a pairs file");
    eval->add_option("--index", eval_args.index, "index file")->required();
    eval->add_option("--pairs", eval_args.pairs, "evaluation pairs (jsonl)")->required();
    eval->add_option("--weights", eval_args.weights, "context generator weights")->required();
    eval->add_option("--k", eval_args.k_list, "comma-separated recall cutoffs");
    eval->add_option("--metrics", eval_args.metrics, "comma-separated metric list");
    eval->add_option("--top-m", eval_args.top_m, "ranking depth (0 = max(k, 10))");
    eval->add_option("--per-component-k", eval_args.per_component_k, "pre-retrieval depth")
        ->check(CLI::PositiveNumber);
    eval->add_option("--out-csv", eval_args.out_csv, "also write metrics CSV here");
    eval->add_option("--seed", eval_args.seed, "hashing embedder seed");
    eval->add_option("--threads", eval_args.threads, "worker threads");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "latency benchmark across scorer backends");
    bench->add_option("--items", bench_args.items, "corpus size")->check(CLI::PositiveNumber);
    bench->add_option("--queries", bench_args.queries, "measured queries")->check(CLI::PositiveNumber);
    bench->add_option("--k-components", bench_args.k_components, "mixture components per side");
    bench->add_option("--dim", bench_args.dim, "embedding width");
    bench->add_option("--backends", bench_args.backends, "comma list: single,maxsim,gmm_index,gmm_scan");
    bench->add_option("--seed", bench_args.seed, "run seed");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) run_synth(synth_args);
        if (train->parsed()) run_train(train_args);
        if (embed->parsed()) run_embed(embed_args);
        if (index->parsed()) {
            if (ib->parsed()) run_index_build(ib_args);
            if (iq->parsed()) {
                if (iq_args.context_gmm.empty() && iq_args.weights.empty()) {
                    std::cerr << "error: --context-text requires --weights\n";
                    return 1;
                }
                run_index_query(iq_args);
            }
        }
        if (eval->parsed()) run_eval(eval_args);
        if (bench->parsed()) run_bench(bench_args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const gme::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
