#include <catch2/catch_amalgamated.hpp>

#include "gme/rng.hpp"
#include "gme/serialize.hpp"

using namespace gme;

namespace {

// random embedding with every entry on the f32 grid (the on-disk precision)
GmmEmbedding random_f32_gmm(Rng& rng, std::size_t k, std::size_t d) {
    GmmEmbedding g(k, d);
    for (double& x : g.means) x = to_f32_grid(rng.uniform(-5.0, 5.0));
    for (double& x : g.log_vars) x = to_f32_grid(rng.uniform(-2.0, 2.0));
    return g;
}

}  // namespace

TEST_CASE("trivial embedding round-trips") {
    GmmEmbedding g(1, 2);
    REQUIRE(deserialize_gmm(serialize_gmm(g)) == g);
}

TEST_CASE("round-trip is the identity on f32-grid embeddings") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 1 + rng.uniform_int(5);
        const std::size_t d = 1 + rng.uniform_int(16);
        GmmEmbedding g = random_f32_gmm(rng, k, d);
        REQUIRE(deserialize_gmm(serialize_gmm(g)) == g);
    }
}

TEST_CASE("serialize then deserialize then serialize is byte-identical") {
    Rng rng(32);
    GmmEmbedding g = random_f32_gmm(rng, 3, 7);
    auto bytes = serialize_gmm(g);
    auto again = serialize_gmm(deserialize_gmm(bytes));
    REQUIRE(bytes == again);
}

TEST_CASE("flipping a header byte is a corrupt-format error") {
    GmmEmbedding g(1, 2);
    auto bytes = serialize_gmm(g);
    bytes[0] ^= 0xff;
    REQUIRE_THROWS_AS(deserialize_gmm(bytes), CorruptFormatError);
}

TEST_CASE("version mismatch is a version error") {
    GmmEmbedding g(1, 2);
    auto bytes = serialize_gmm(g);
    bytes[4] = 0x7f;  // version field follows the 4-byte magic
    REQUIRE_THROWS_AS(deserialize_gmm(bytes), VersionError);
}

TEST_CASE("truncated payload is a corrupt-format error") {
    Rng rng(33);
    GmmEmbedding g = random_f32_gmm(rng, 2, 3);
    auto bytes = serialize_gmm(g);
    for (std::size_t cut : {bytes.size() - 1, bytes.size() - 5, std::size_t{10}, std::size_t{3}}) {
        std::vector<std::uint8_t> short_bytes(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        REQUIRE_THROWS_AS(deserialize_gmm(short_bytes), CorruptFormatError);
    }
}

TEST_CASE("trailing garbage is rejected") {
    GmmEmbedding g(1, 2);
    auto bytes = serialize_gmm(g);
    bytes.push_back(0);
    REQUIRE_THROWS_AS(deserialize_gmm(bytes), CorruptFormatError);
}

TEST_CASE("record streams round-trip with ids") {
    Rng rng(34);
    std::vector<GmmRecord> records;
    for (int i = 0; i < 5; ++i)
        records.push_back({"item-" + std::to_string(i), random_f32_gmm(rng, 1 + i % 3, 4)});
    auto bytes = serialize_gmm_records(records);
    auto back = deserialize_gmm_records(bytes);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        REQUIRE(back[i].id == records[i].id);
        REQUIRE(back[i].gmm == records[i].gmm);
    }
}

TEST_CASE("weights round-trip bit-exactly") {
    Rng rng(35);
    ParamGenWeights w;
    w.components = 3;
    w.dim = 4;
    w.seeds.assign(12, 0.0);
    w.map_mean = AffineMap(4);
    w.map_logvar = AffineMap(4);
    for (double& x : w.seeds) x = rng.gaussian();
    for (double& x : w.map_mean.weight) x = rng.gaussian();
    for (double& x : w.map_mean.bias) x = rng.gaussian();
    for (double& x : w.map_logvar.weight) x = rng.gaussian();
    for (double& x : w.map_logvar.bias) x = rng.gaussian();
    REQUIRE(deserialize_weights(serialize_weights(w)) == w);

    SECTION("per-input-mode weights (no seeds) survive too") {
        w.components = 0;
        w.seeds.clear();
        REQUIRE(deserialize_weights(serialize_weights(w)) == w);
    }

    SECTION("weights corruption is detected") {
        auto bytes = serialize_weights(w);
        bytes.resize(bytes.size() / 2);
        REQUIRE_THROWS_AS(deserialize_weights(bytes), CorruptFormatError);
    }
}

TEST_CASE("embedding validation rejects bad values") {
    GmmEmbedding g(1, 2);
    g.log_vars[0] = 11.0;  // above the clamp range
    REQUIRE_THROWS_AS(g.validate(), InvalidArgument);
    g.log_vars[0] = 0.0;
    g.means[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(g.validate(), InvalidArgument);
}
