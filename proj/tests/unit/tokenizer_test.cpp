#include "muserag/tokenizer.hpp"

#include "muserag/errors.hpp"

#include <doctest.h>

#include <random>

using namespace muserag;

TEST_SUITE("tokenizer") {

TEST_CASE("word runs split on punctuation and whitespace") {
    TokenizerSpec tok{TokenizerKind::unicode_word};
    auto tokens = tokenize(tok, "Hip-Hop / Rap");
    REQUIRE(tokens.size() == 3);
    CHECK(tokens[0] == "Hip");
    CHECK(tokens[1] == "Hop");
    CHECK(tokens[2] == "Rap");

    CHECK(tokenize(tok, "im 2 cool4u") == std::vector<std::string>{"im", "2", "cool4u"});
    CHECK(tokenize(tok, "...!!!").empty());
    CHECK(count_tokens(tok, "") == 0);
}

TEST_CASE("non-ascii letters stay inside tokens, unicode punctuation splits") {
    TokenizerSpec tok{TokenizerKind::unicode_word};
    auto tokens = tokenize(tok, "Bj\xC3\xB6rk \xE2\x80\x94 D\xC3\xA9" "but");
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0] == "Bj\xC3\xB6rk");
    CHECK(tokens[1] == "D\xC3\xA9" "but");
}

TEST_CASE("whitespace tokenizer keeps punctuation attached") {
    TokenizerSpec tok{TokenizerKind::whitespace};
    auto tokens = tokenize(tok, "  rock-n-roll,  jazz  ");
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0] == "rock-n-roll,");
    CHECK(tokens[1] == "jazz");
}

TEST_CASE("index terms are ascii lowercased") {
    CHECK(index_term("Rock") == "rock");
    CHECK(index_term("AC4") == "ac4");
    CHECK(index_term("d\xC3\xA9j\xC3\xA0") == "d\xC3\xA9j\xC3\xA0");
}

TEST_CASE("spans address the original bytes") {
    TokenizerSpec tok{TokenizerKind::unicode_word};
    std::string text = "The Velvet--Underground (1967)";
    auto spans = tokenize_spans(tok, text);
    auto tokens = tokenize(tok, text);
    REQUIRE(spans.size() == tokens.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        CHECK(text.substr(spans[i].begin, spans[i].end - spans[i].begin) == tokens[i]);
    }
}

TEST_CASE("tokenization is deterministic on random byte strings") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int round = 0; round < 200; ++round) {
        std::string text;
        for (int i = 0; i < 64; ++i) text.push_back(static_cast<char>(byte(rng)));
        for (TokenizerKind kind : {TokenizerKind::unicode_word, TokenizerKind::whitespace}) {
            TokenizerSpec tok{kind};
            CHECK(tokenize(tok, text) == tokenize(tok, text));
        }
    }
}

TEST_CASE("fingerprint round-trips") {
    for (TokenizerKind kind : {TokenizerKind::unicode_word, TokenizerKind::whitespace}) {
        TokenizerSpec tok{kind};
        CHECK(TokenizerSpec::from_fingerprint(tok.fingerprint()) == tok);
    }
    CHECK_THROWS_AS(TokenizerSpec::from_fingerprint("nope"), FormatError);
}

} // TEST_SUITE
