#include <catch2/catch_amalgamated.hpp>

#include "gme/rng.hpp"

using namespace gme;

TEST_CASE("identical seeds yield identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 10; ++i) REQUIRE(c.gaussian() == d.gaussian());
}

TEST_CASE("distinct seeds diverge immediately") {
    Rng a(42), b(43);
    REQUIRE(a.next_u64() != b.next_u64());
}

TEST_CASE("seed zero is a valid stream") {
    Rng r(0);
    std::uint64_t first = r.next_u64();
    std::uint64_t second = r.next_u64();
    REQUIRE(first != second);
    Rng r2(0);
    REQUIRE(r2.next_u64() == first);
}

TEST_CASE("uniform stays in [0,1)") {
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("gaussian moments are sane") {
    Rng r(123);
    const int n = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = r.gaussian();
        sum += g;
        sum_sq += g * g;
    }
    REQUIRE(std::abs(sum / n) < 0.05);
    REQUIRE(std::abs(sum_sq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is deterministic per seed") {
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8}, v2 = v1;
    Rng a(9), b(9);
    a.shuffle(v1);
    b.shuffle(v2);
    REQUIRE(v1 == v2);
}

TEST_CASE("fnv1a64 matches reference vectors") {
    // published FNV-1a test vectors
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ULL);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    REQUIRE(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
