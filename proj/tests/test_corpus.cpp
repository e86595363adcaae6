#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "gme/corpus.hpp"

using namespace gme;

TEST_CASE("pair records parse from line-delimited JSON") {
    std::istringstream in(
        "{\"id\":\"p1\",\"context\":\"hello there\",\"response\":\"hi\"}\n"
        "\n"
        "{\"id\":\"p2\",\"context\":\"with \\\"quotes\\\"\",\"response\":\"ok\"}\n");
    auto pairs = parse_pairs(in);
    REQUIRE(pairs.size() == 2);
    REQUIRE(pairs[0].id == "p1");
    REQUIRE(pairs[1].context == "with \"quotes\"");
}

TEST_CASE("malformed lines report their line number") {
    std::istringstream in("{\"id\":\"p1\",\"context\":\"a\",\"response\":\"b\"}\nnot json\n");
    try {
        parse_pairs(in);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(e.line_number == 2);
    }
    std::istringstream missing("{\"id\":\"p1\",\"context\":\"a\"}\n");
    REQUIRE_THROWS_AS(parse_pairs(missing), ParseError);
}

TEST_CASE("corpus items prefer the requested text field") {
    std::istringstream in("{\"id\":\"x\",\"context\":\"ctx words\",\"response\":\"resp words\"}\n");
    auto items = parse_corpus_items(in, {"response", "text"});
    REQUIRE(items.size() == 1);
    REQUIRE(items[0].text.value() == "resp words");
}

TEST_CASE("corpus items accept embedded token matrices") {
    std::istringstream in("{\"id\":\"x\",\"tokens\":[[0.5,1.5],[2.5,-3.5]]}\n");
    auto items = parse_corpus_items(in);
    REQUIRE(items.size() == 1);
    REQUIRE(!items[0].text.has_value());
    const TokenMatrix& X = items[0].tokens.value();
    REQUIRE(X.tokens == 2);
    REQUIRE(X.dim == 2);
    REQUIRE(X.at(1, 1) == -3.5);

    std::istringstream ragged("{\"id\":\"x\",\"tokens\":[[1],[1,2]]}\n");
    REQUIRE_THROWS_AS(parse_corpus_items(ragged), ParseError);

    std::istringstream empty_rec("{\"id\":\"x\"}\n");
    REQUIRE_THROWS_AS(parse_corpus_items(empty_rec), ParseError);
}

TEST_CASE("pairs write back to jsonl and re-parse") {
    std::vector<PairItem> pairs{{"a", "line one", "reply \"quoted\""}, {"b", "two", "three"}};
    std::istringstream in(pairs_to_jsonl(pairs));
    auto back = parse_pairs(in);
    REQUIRE(back.size() == 2);
    REQUIRE(back[0].response == pairs[0].response);
    REQUIRE(back[1].id == "b");
}

TEST_CASE("missing files raise io errors") {
    REQUIRE_THROWS_AS(read_pairs("/nonexistent/path.jsonl"), IoError);
}
