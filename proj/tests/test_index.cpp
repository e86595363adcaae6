#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "gme/index.hpp"
#include "gme/rng.hpp"

using namespace gme;

namespace {

GmmEmbedding random_gmm(Rng& rng, std::size_t k, std::size_t d) {
    GmmEmbedding g(k, d);
    for (double& x : g.means) x = rng.gaussian() * 2.0;
    for (double& x : g.log_vars) x = rng.uniform(-1.0, 1.0);
    return g;
}

std::vector<GmmRecord> random_store(Rng& rng, std::size_t n, std::size_t k, std::size_t d) {
    std::vector<GmmRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({"r" + std::to_string(i), random_gmm(rng, k, d)});
    return out;
}

// test-side exhaustive oracle: rank every stored response by full approximate KL
std::vector<std::string> brute_ranking(const std::vector<GmmRecord>& store, const GmmEmbedding& ctx) {
    std::vector<std::pair<double, std::string>> scored;
    for (const GmmRecord& r : store) scored.emplace_back(gmm_kl_approx(quantize_f32(r.gmm), ctx).total, r.id);
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> ids;
    for (auto& [s, id] : scored) ids.push_back(id);
    return ids;
}

}  // namespace

TEST_CASE("kmeans with N == C reaches zero distortion") {
    Rng rng(40);
    const std::size_t n = 6, d = 3;
    std::vector<double> pts(n * d);
    for (double& x : pts) x = rng.gaussian();
    auto centroids = kmeans(pts, n, d, n, 5, 1);
    // every point must coincide with some centroid
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = pts[i * d + j] - centroids[c * d + j];
                s += diff * diff;
            }
            best = std::min(best, s);
        }
        REQUIRE(best == 0.0);
    }
}

TEST_CASE("kmeans separates two blobs with full purity") {
    Rng rng(41);
    const std::size_t per = 40, d = 2;
    std::vector<double> pts;
    for (std::size_t i = 0; i < per; ++i) {
        pts.push_back(0.0 + 0.1 * rng.gaussian());
        pts.push_back(0.0 + 0.1 * rng.gaussian());
    }
    for (std::size_t i = 0; i < per; ++i) {
        pts.push_back(10.0 + 0.1 * rng.gaussian());
        pts.push_back(10.0 + 0.1 * rng.gaussian());
    }
    auto centroids = kmeans(pts, 2 * per, d, 2, 15, 2);
    // one centroid inside each blob's bounding box
    std::set<int> blobs;
    for (std::size_t c = 0; c < 2; ++c) {
        const double x = centroids[c * d], y = centroids[c * d + 1];
        if (x < 1.0 && y < 1.0) blobs.insert(0);
        if (x > 9.0 && y > 9.0) blobs.insert(1);
    }
    REQUIRE(blobs.size() == 2);
    // assignment purity: all points of a blob share their nearest centroid
    auto nearest = [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t who = 0;
        for (std::size_t c = 0; c < 2; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = pts[i * d + j] - centroids[c * d + j];
                s += diff * diff;
            }
            if (s < best) {
                best = s;
                who = c;
            }
        }
        return who;
    };
    for (std::size_t i = 1; i < per; ++i) REQUIRE(nearest(i) == nearest(0));
    for (std::size_t i = per + 1; i < 2 * per; ++i) REQUIRE(nearest(i) == nearest(per));
    REQUIRE(nearest(0) != nearest(per));
}

TEST_CASE("kmeans with zero iterations returns the seeded initialization") {
    Rng rng(42);
    std::vector<double> pts(30);
    for (double& x : pts) x = rng.gaussian();
    auto a = kmeans(pts, 10, 3, 4, 0, 7);
    auto b = kmeans(pts, 10, 3, 4, 0, 7);
    REQUIRE(a == b);
    auto c = kmeans(pts, 10, 3, 4, 0, 8);
    REQUIRE(a != c);
}

TEST_CASE("kmeans rejects fewer points than cells") {
    std::vector<double> pts(4);
    REQUIRE_THROWS_AS(kmeans(pts, 2, 2, 3, 1, 1), InvalidArgument);
}

TEST_CASE("kmeans survives duplicate points that empty a cluster") {
    // four coincident points force duplicate seeds, ties in assignment, and
    // the empty-cluster reseed path
    std::vector<double> pts{0.0, 0.0, 0.0, 0.0, 10.0, 10.0};
    auto centroids = kmeans(pts, 6, 1, 4, 3, 1);
    REQUIRE(centroids.size() == 4);
    for (double c : centroids) REQUIRE((c == 0.0 || c == 10.0));
    // distortion stays zero: every point coincides with a centroid
    for (std::size_t i = 0; i < 6; ++i) {
        double best = 1e300;
        for (double c : centroids) best = std::min(best, (pts[i] - c) * (pts[i] - c));
        REQUIRE(best == 0.0);
    }
}

TEST_CASE("single response builds a single-entry index") {
    Rng rng(43);
    auto store = random_store(rng, 1, 1, 4);
    GmmIndex idx = GmmIndex::build(store, 1, 1, 1);
    REQUIRE(idx.size() == 1);
    REQUIRE(idx.total_entries() == 1);
    auto res = idx.query(store[0].gmm, 10, 1);
    REQUIRE(res.size() == 1);
    REQUIRE(res[0].id == "r0");
    REQUIRE_THAT(res[0].score,
                 Catch::Matchers::WithinAbs(gmm_kl_approx(quantize_f32(store[0].gmm), store[0].gmm).total, 1e-12));
}

TEST_CASE("total list entries equal responses times components") {
    Rng rng(44);
    auto store = random_store(rng, 17, 3, 4);
    GmmIndex idx = GmmIndex::build(store, 5, 2, 1);
    REQUIRE(idx.total_entries() == 17 * 3);
}

TEST_CASE("duplicate embeddings under distinct ids are both retrievable") {
    Rng rng(45);
    GmmEmbedding g = random_gmm(rng, 2, 3);
    std::vector<GmmRecord> store{{"first", g}, {"second", g}};
    GmmIndex idx = GmmIndex::build(store, 1, 1, 1);
    auto res = idx.query(g, 10, 2);
    REQUIRE(res.size() == 2);
    REQUIRE(res[0].id == "first");  // tie on score -> id order
    REQUIRE(res[1].id == "second");
}

TEST_CASE("duplicate ids are rejected at build time") {
    Rng rng(46);
    GmmEmbedding g = random_gmm(rng, 1, 2);
    std::vector<GmmRecord> store{{"x", g}, {"x", g}};
    REQUIRE_THROWS_AS(GmmIndex::build(store, 1, 1, 1), InvalidArgument);
}

TEST_CASE("query of a stored embedding ranks it first with score zero") {
    Rng rng(47);
    auto store = random_store(rng, 50, 2, 4);
    GmmIndex idx = GmmIndex::build(store, 0, 0, 3);
    const GmmEmbedding probe = quantize_f32(store[13].gmm);
    auto res = idx.query(probe, 10, 5, idx.cells());
    REQUIRE(res.front().id == "r13");
    REQUIRE(res.front().score == 0.0);
}

TEST_CASE("recall sandwich: exhaustive probing with full lists reproduces the brute ranking") {
    Rng rng(48);
    auto store = random_store(rng, 120, 2, 4);
    GmmIndex idx = GmmIndex::build(store, 8, 1, 5);
    for (int q = 0; q < 10; ++q) {
        GmmEmbedding ctx = random_gmm(rng, 3, 4);
        auto res = idx.query(ctx, idx.total_entries(), store.size(), idx.cells());
        auto oracle = brute_ranking(store, ctx);
        REQUIRE(res.size() == oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) REQUIRE(res[i].id == oracle[i]);
    }
}

TEST_CASE("candidate sets grow monotonically with n_probe and per_component_k") {
    Rng rng(49);
    auto store = random_store(rng, 150, 2, 4);
    GmmIndex idx = GmmIndex::build(store, 10, 1, 6);
    GmmEmbedding ctx = random_gmm(rng, 2, 4);
    auto ids_of = [&](std::size_t k, std::size_t probes) {
        std::set<std::string> s;
        for (const auto& c : idx.query(ctx, k, store.size(), probes)) s.insert(c.id);
        return s;
    };
    std::set<std::string> prev;
    for (std::size_t probes : {1, 2, 4, 10}) {
        auto cur = ids_of(5, probes);
        REQUIRE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = cur;
    }
    prev.clear();
    for (std::size_t k : {1, 3, 9, 27}) {
        auto cur = ids_of(k, 4);
        REQUIRE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = cur;
    }
}

TEST_CASE("no response id appears twice in results") {
    Rng rng(50);
    auto store = random_store(rng, 80, 3, 4);
    GmmIndex idx = GmmIndex::build(store, 6, 3, 7);
    GmmEmbedding ctx = random_gmm(rng, 4, 4);
    auto res = idx.query(ctx, 10, 80);
    std::set<std::string> seen;
    for (const auto& c : res) {
        REQUIRE(!seen.count(c.id));
        seen.insert(c.id);
    }
    // results come back ascending by score
    for (std::size_t i = 1; i < res.size(); ++i) REQUIRE(res[i - 1].score <= res[i].score);
}

TEST_CASE("query validates its arguments") {
    Rng rng(51);
    auto store = random_store(rng, 5, 1, 3);
    GmmIndex idx = GmmIndex::build(store, 2, 1, 1);
    GmmEmbedding ctx = random_gmm(rng, 1, 3);
    REQUIRE_THROWS_AS(idx.query(ctx, 10, 0), InvalidArgument);
    GmmEmbedding wrong = random_gmm(rng, 1, 4);
    REQUIRE_THROWS_AS(idx.query(wrong, 10, 1), DimensionError);
}

TEST_CASE("index save/load round-trips queries and bytes") {
    Rng rng(52);
    auto store = random_store(rng, 60, 2, 4);
    GmmIndex idx = GmmIndex::build(store, 6, 2, 9);
    auto bytes = idx.save();
    GmmIndex back = GmmIndex::load(bytes);
    REQUIRE(back.save() == bytes);  // canonical serialization
    for (int q = 0; q < 5; ++q) {
        GmmEmbedding ctx = random_gmm(rng, 2, 4);
        auto a = idx.query(ctx, 10, 10);
        auto b = back.query(ctx, 10, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].id == b[i].id);
            REQUIRE(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("loading a truncated index fails with a corrupt error") {
    Rng rng(53);
    auto store = random_store(rng, 10, 1, 3);
    GmmIndex idx = GmmIndex::build(store, 3, 1, 1);
    auto bytes = idx.save();
    bytes.resize(bytes.size() - 7);
    REQUIRE_THROWS_AS(GmmIndex::load(bytes), CorruptFormatError);
    auto bad_version = idx.save();
    bad_version[5] = 0x42;
    REQUIRE_THROWS_AS(GmmIndex::load(bad_version), VersionError);
}

TEST_CASE("every stored component mean lands in exactly one list") {
    Rng rng(54);
    auto store = random_store(rng, 25, 3, 4);
    GmmIndex idx = GmmIndex::build(store, 4, 2, 11);
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> seen;
    for (const auto& list : idx.lists())
        for (std::size_t e = 0; e < list.size(); ++e) ++seen[{list.response[e], list.component[e]}];
    REQUIRE(seen.size() == 25 * 3);
    for (const auto& [key, count] : seen) REQUIRE(count == 1);
}

TEST_CASE("list entries sit no farther from their own centroid than from any other") {
    Rng rng(56);
    auto store = random_store(rng, 40, 2, 3);
    GmmIndex idx = GmmIndex::build(store, 5, 2, 13);
    for (std::size_t c = 0; c < idx.cells(); ++c) {
        const auto& list = idx.lists()[c];
        for (std::size_t e = 0; e < list.size(); ++e) {
            std::span<const double> mean(list.means.data() + e * idx.dim(), idx.dim());
            double own = 0.0;
            for (std::size_t j = 0; j < idx.dim(); ++j) {
                const double diff = mean[j] - idx.centroid(c)[j];
                own += diff * diff;
            }
            for (std::size_t other = 0; other < idx.cells(); ++other) {
                double dist = 0.0;
                for (std::size_t j = 0; j < idx.dim(); ++j) {
                    const double diff = mean[j] - idx.centroid(other)[j];
                    dist += diff * diff;
                }
                if (other < c) REQUIRE(dist > own);  // ties break to the lower index
                else REQUIRE(dist >= own);
            }
        }
    }
}

TEST_CASE("build rejects inconsistent dimensions and empty input") {
    Rng rng(55);
    std::vector<GmmRecord> store{{"a", random_gmm(rng, 1, 3)}, {"b", random_gmm(rng, 1, 4)}};
    REQUIRE_THROWS_AS(GmmIndex::build(store), DimensionError);
    REQUIRE_THROWS_AS(GmmIndex::build({}), InvalidArgument);
}
