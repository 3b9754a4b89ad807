#include "muserag/generation.hpp"

#include "muserag/errors.hpp"
#include "support/fixtures.hpp"
#include "support/mock_http.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace muserag;
using fixtures::MockServer;
using fixtures::make_passage;
using json = nlohmann::json;

namespace {

const std::vector<std::string> kOptions = {"Thriller", "Bad", "Dangerous", "Invincible"};

RetrievedContext two_passage_context() {
    RetrievedContext ctx;
    ctx.query = "debut album";
    ctx.items.push_back({make_passage("a#s0#c0", "First passage body."), 2.0});
    ctx.items.push_back({make_passage("b#s0#c0", "Second passage body."), 1.0});
    ctx.total_tokens = 6;
    return ctx;
}

} // namespace

TEST_SUITE("generation") {

TEST_CASE("context blocks precede the question in rank order") {
    PromptTemplate tmpl = PromptTemplate::default_mcq();
    RetrievedContext ctx = two_passage_context();

    std::string with_ctx = assemble_prompt("Which album came first?", kOptions, &ctx, tmpl);
    std::size_t first = with_ctx.find("First passage body.");
    std::size_t second = with_ctx.find("Second passage body.");
    std::size_t question = with_ctx.find("Which album came first?");
    REQUIRE(first != std::string::npos);
    REQUIRE(second != std::string::npos);
    REQUIRE(question != std::string::npos);
    CHECK(first < second);
    CHECK(second < question);
    CHECK(with_ctx.find("A. Thriller") != std::string::npos);
    CHECK(with_ctx.find("D. Invincible") != std::string::npos);
}

TEST_CASE("zero-shot and rag prompts differ only by the context prefix") {
    PromptTemplate tmpl = PromptTemplate::default_mcq();
    RetrievedContext ctx = two_passage_context();

    std::string zero = assemble_prompt("Which album came first?", kOptions, nullptr, tmpl);
    std::string rag = assemble_prompt("Which album came first?", kOptions, &ctx, tmpl);
    REQUIRE(rag.size() > zero.size());
    CHECK(rag.substr(rag.size() - zero.size()) == zero);

    CHECK(assemble_prompt("q", kOptions, nullptr, tmpl) ==
          assemble_prompt("q", kOptions, nullptr, tmpl));
    CHECK(assemble_prompt("q", kOptions, &ctx, tmpl) == assemble_prompt("q", kOptions, &ctx, tmpl));

    CHECK_THROWS_AS(assemble_prompt("q", {"only", "three", "options"}, nullptr, tmpl), InputError);
}

TEST_CASE("choice parser accepts the strict letter grammar") {
    auto check_ok = [](const std::string& raw, char expected) {
        ChoiceVerdict v = parse_choice(raw);
        CAPTURE(raw);
        CHECK(v.format_ok);
        REQUIRE(v.parsed.has_value());
        CHECK(*v.parsed == expected);
    };
    auto check_bad = [](const std::string& raw) {
        ChoiceVerdict v = parse_choice(raw);
        CAPTURE(raw);
        CHECK_FALSE(v.format_ok);
        CHECK_FALSE(v.parsed.has_value());
    };

    check_ok("B", 'B');
    check_ok("  B", 'B');
    check_ok("B\n", 'B');
    check_ok("C) Because the album came out in 1982", 'C');
    check_ok("A.", 'A');
    check_ok("D: final answer", 'D');
    check_ok("(B)", 'B');
    check_ok(" (A) with a tail", 'A');

    check_bad("The answer is B");
    check_bad("b");
    check_bad("E");
    check_bad("");
    check_bad("   ");
    check_bad("B, because");
    check_bad("BD");
    check_bad("(B");
    check_bad("answer: C");
}

TEST_CASE("choice parser is total and sound on random input") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 24);
    for (int round = 0; round < 2000; ++round) {
        std::string raw;
        int n = len(rng);
        for (int i = 0; i < n; ++i) raw.push_back(static_cast<char>(byte(rng)));
        ChoiceVerdict v = parse_choice(raw);
        if (!v.format_ok) {
            CHECK_FALSE(v.parsed.has_value());
            continue;
        }
        REQUIRE(v.parsed.has_value());
        CHECK(*v.parsed >= 'A');
        CHECK(*v.parsed <= 'D');
        std::size_t i = 0;
        while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
        char at = raw[i] == '(' ? raw[i + 1] : raw[i];
        CHECK(at == *v.parsed);
    }
}

TEST_CASE("http generator round-trips a chat completion") {
    MockServer mock;
    mock.server().Post("/v1/chat/completions",
                       [](const httplib::Request& req, httplib::Response& res) {
                           json body = json::parse(req.body);
                           REQUIRE(body["messages"].size() == 2);
                           CHECK(body["messages"][0]["role"] == "system");
                           CHECK(body["temperature"].get<double>() == 0.0);
                           json reply = {{"choices",
                                          {{{"message", {{"role", "assistant"}, {"content", "B"}}}}}}};
                           res.set_content(reply.dump(), "application/json");
                       });
    mock.start();

    GeneratorConfig config;
    config.endpoint = mock.url("/v1/chat/completions");
    config.model = "test-model";
    HttpGenerator generator(config);
    CHECK(generator.complete("system text", "user text") == "B");
}

TEST_CASE("http generator retries and eventually gives up") {
    MockServer mock;
    std::atomic<int> calls{0};
    mock.server().Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           if (calls.fetch_add(1) == 0) {
                               res.status = 500;
                               return;
                           }
                           json reply = {{"choices",
                                          {{{"message", {{"content", "A"}}}}}}};
                           res.set_content(reply.dump(), "application/json");
                       });
    mock.start();

    GeneratorConfig config;
    config.endpoint = mock.url("/v1/chat/completions");
    config.backoff_ms = 1;
    HttpGenerator generator(config);
    CHECK(generator.complete("", "prompt") == "A");
    CHECK(calls.load() == 2);

    GeneratorConfig dead;
    dead.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    dead.max_retries = 1;
    dead.backoff_ms = 1;
    dead.timeout_ms = 200;
    HttpGenerator hopeless(dead);
    CHECK_THROWS_AS(hopeless.complete("", "prompt"), UnavailableError);
}

TEST_CASE("scripted generator matches rules in order") {
    fixtures::TempDir dir;
    fixtures::write_file(dir.file("script.jsonl"),
                         R"({"contains":"first question","response":"A"})"
                         "\n"
                         R"({"contains":"second question","response":"B) explained"})"
                         "\n"
                         R"({"default":"The answer is C"})"
                         "\n");
    ScriptedGenerator generator = ScriptedGenerator::from_file(dir.file("script.jsonl"));
    CHECK(generator.complete("", "tell me the first question please") == "A");
    CHECK(generator.complete("", "now the second question") == "B) explained");
    CHECK(generator.complete("", "something else entirely") == "The answer is C");

    FixedGenerator fixed("B");
    CHECK(fixed.complete("sys", "anything") == "B");
}

} // TEST_SUITE
