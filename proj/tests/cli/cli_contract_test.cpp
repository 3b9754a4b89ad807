// Exercises the installed binary's exit-code contract: 0 on success, 1 on
// expected failures with a machine-greppable code, 2 on usage errors. The
// binary path arrives via the MUSERAG_CLI environment variable.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/fixtures.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr interleaved
};

RunResult run(const std::string& args) {
    const char* cli = std::getenv("MUSERAG_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "MUSERAG_CLI must point at the built binary");
    std::string command = std::string(cli) + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    std::array<char, 4096> buffer{};
    while (fgets(buffer.data(), buffer.size(), pipe)) result.output += buffer.data();
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help exits zero") {
    RunResult result = run("--help");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("ingest") != std::string::npos);
    CHECK(run("eval --help").exit_code == 0);
}

TEST_CASE("usage problems exit two") {
    CHECK(run("frobnicate").exit_code == 2);
    CHECK(run("").exit_code == 2);
    CHECK(run("eval").exit_code == 2); // missing required --benchmark
}

TEST_CASE("expected failures exit one with an error code") {
    fixtures::TempDir dir;
    fixtures::write_file(
        dir.file("bench.jsonl"),
        R"({"item_id":"i","question":"Q?","options":["a","b","c","d"],"answer_key":"A","question_type":"factual","category":"X"})"
        "\n");

    RunResult missing_index =
        run("eval --benchmark " + dir.file("bench.jsonl") + " --mode rag --generator mock");
    CHECK(missing_index.exit_code == 1);
    CHECK(missing_index.output.find("E_CONFIG") != std::string::npos);

    RunResult missing_file = run("index stats --index " + dir.file("nope.idx"));
    CHECK(missing_file.exit_code == 1);
    CHECK(missing_file.output.find("E_IO") != std::string::npos);

    fixtures::write_file(dir.file("bad.jsonl"), "not json\n");
    RunResult bad_corpus =
        run("ingest --corpus " + dir.file("bad.jsonl") + " --out " + dir.file("out.jsonl"));
    CHECK(bad_corpus.exit_code == 1);
    CHECK(bad_corpus.output.find("E_PARSE") != std::string::npos);
}

TEST_CASE("every run prints a reproducibility header") {
    fixtures::TempDir dir;
    fixtures::write_file(dir.file("empty.jsonl"), "");
    RunResult result =
        run("ingest --corpus " + dir.file("empty.jsonl") + " --out " + dir.file("p.jsonl") +
            " --seed 17");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("muserag 0.1.0 | config ") != std::string::npos);
    CHECK(result.output.find("| seed 17") != std::string::npos);
}

TEST_CASE("dense retrieval works end to end with the hash embedder") {
    fixtures::TempDir dir;
    std::string corpus;
    for (int i = 0; i < 3; ++i) {
        std::string text;
        for (int t = 0; t < 70; ++t) text += "peak" + std::to_string(i) + "w" + std::to_string(t) + " ";
        corpus += R"({"doc_id":"d)" + std::to_string(i) + R"(","title":"D)" + std::to_string(i) +
                  R"(","category":"other","sections":[{"heading":"h","text":")" + text + R"("}]})" +
                  "\n";
    }
    fixtures::write_file(dir.file("corpus.jsonl"), corpus);

    CHECK(run("ingest --corpus " + dir.file("corpus.jsonl") + " --out " +
              dir.file("passages.jsonl"))
              .exit_code == 0);
    CHECK(run("embed --passages " + dir.file("passages.jsonl") + " --embedding hash:32 --out " +
              dir.file("vectors.bin"))
              .exit_code == 0);
    CHECK(run("stats --passages " + dir.file("passages.jsonl")).output.find("passages: 3") !=
          std::string::npos);

    RunResult query = run("query --vectors " + dir.file("vectors.bin") + " --passages " +
                          dir.file("passages.jsonl") +
                          " --backend dense --embedding hash:32 --q \"peak1w3 peak1w4\"");
    CHECK(query.exit_code == 0);
    CHECK(query.output.find("d1#s0#c0") != std::string::npos);

    std::string item =
        R"({"item_id":"i0","question":"peak2w5 peak2w6 peak2w7?","options":["a","b","c","d"],"answer_key":"C","question_type":"factual","category":"X"})"
        "\n";
    fixtures::write_file(dir.file("bench.jsonl"), item);
    RunResult eval = run("eval --benchmark " + dir.file("bench.jsonl") +
                         " --mode rag --backend dense --vectors " + dir.file("vectors.bin") +
                         " --passages " + dir.file("passages.jsonl") +
                         " --embedding hash:32 --generator mock:C");
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("accuracy: 100.0%") != std::string::npos);
}

TEST_CASE("bench build and export-finetune run hermetically with bundled data") {
    const char* data_dir = std::getenv("MUSERAG_DATA_DIR");
    REQUIRE_MESSAGE(data_dir != nullptr, "MUSERAG_DATA_DIR must point at the data directory");
    fixtures::TempDir dir;

    // Two artists, one 550-token section each.
    std::string corpus, artists;
    for (int i = 0; i < 2; ++i) {
        std::string text;
        for (int t = 0; t < 550; ++t) text += "tone" + std::to_string(t % 97) + " ";
        corpus += R"({"doc_id":"band-)" + std::to_string(i) + R"(","title":"Band )" +
                  std::to_string(i) + R"(","category":"artists","abstract":"Band )" +
                  std::to_string(i) + R"( formed in Lisbon.","sections":[{"heading":"Career","text":")" +
                  text + R"("}]})" + "\n";
        artists += R"({"doc_id":"band-)" + std::to_string(i) + R"(","name":"Band )" +
                   std::to_string(i) + R"(","abstract":"Formed in Lisbon.","topics":["career"],"raw_genres":["Rock"]})" +
                   "\n";
    }
    fixtures::write_file(dir.file("corpus.jsonl"), corpus);
    fixtures::write_file(dir.file("artists.jsonl"), artists);

    // Scripted generator keyed to distinctive template phrases.
    fixtures::write_file(
        dir.file("script.jsonl"),
        R"({"contains":"verifiable details","response":"{\"question\": \"Which year anchors the career?\", \"options\": [\"1970\", \"1980\", \"1990\", \"2000\"], \"answer\": \"A\"}"})"
        "\n"
        R"({"contains":"reasoning or synthesis","response":"{\"question\": \"What spans the whole career?\", \"options\": [\"touring\", \"silence\", \"retirement\", \"litigation\"], \"answer\": \"A\"}"})"
        "\n"
        R"({"contains":"musical aspects","response":"yes"})"
        "\n"
        R"({"contains":"Provided text","response":"yes"})"
        "\n"
        R"({"contains":"country","response":"Portugal"})"
        "\n");

    CHECK(run("ingest --corpus " + dir.file("corpus.jsonl") + " --out " +
              dir.file("passages.jsonl"))
              .exit_code == 0);
    RunResult bench = run("bench build --corpus " + dir.file("passages.jsonl") + " --artists " +
                          dir.file("artists.jsonl") + " --n 2 --generator script:" +
                          dir.file("script.jsonl") + " --data-dir " + std::string(data_dir) +
                          " --out " + dir.file("bench.jsonl") + " --review-queue " +
                          dir.file("review.jsonl") + " --seed 5");
    CHECK(bench.exit_code == 0);
    CHECK(bench.output.find("items: 4") != std::string::npos);
    CHECK(fixtures::read_file(dir.file("review.jsonl")).find("retained") != std::string::npos);

    RunResult qa = run("export-finetune --benchmark " + dir.file("bench.jsonl") +
                       " --style qa --out " + dir.file("qa.jsonl"));
    CHECK(qa.exit_code == 0);
    CHECK(qa.output.find("\"record_count\": 4") != std::string::npos);

    RunResult rag = run("export-finetune --benchmark " + dir.file("bench.jsonl") +
                        " --style rag --passages " + dir.file("passages.jsonl") + " --out " +
                        dir.file("rag.jsonl") + " --manifest " + dir.file("manifest.json"));
    CHECK(rag.exit_code == 0);
    CHECK(fixtures::read_file(dir.file("manifest.json")).find("training_advisory") !=
          std::string::npos);
    CHECK(fixtures::read_file(dir.file("rag.jsonl")).find("tone42") != std::string::npos);
}

TEST_CASE("index stats, sparse query and the ablation grid run over one corpus") {
    fixtures::TempDir dir;
    std::string corpus;
    for (int i = 0; i < 4; ++i) {
        std::string text = "marker" + std::to_string(i) + " ";
        for (int t = 0; t < 69; ++t) text += "filler" + std::to_string((i * 7 + t) % 23) + " ";
        corpus += R"({"doc_id":"s)" + std::to_string(i) + R"(","title":"S)" + std::to_string(i) +
                  R"(","category":"theory","sections":[{"heading":"h","text":")" + text +
                  R"("}]})" + "\n";
    }
    fixtures::write_file(dir.file("corpus.jsonl"), corpus);

    for (int chunk : {128, 256}) {
        std::string tag = std::to_string(chunk);
        CHECK(run("ingest --corpus " + dir.file("corpus.jsonl") + " --chunk-size " + tag +
                  " --out " + dir.file("p" + tag + ".jsonl"))
                  .exit_code == 0);
        CHECK(run("index build --passages " + dir.file("p" + tag + ".jsonl") + " --out " +
                  dir.file("c" + tag + ".idx"))
                  .exit_code == 0);
    }

    RunResult stats = run("index stats --index " + dir.file("c128.idx"));
    CHECK(stats.exit_code == 0);
    CHECK(stats.output.find("passages: 4") != std::string::npos);
    CHECK(stats.output.find("tokenizer: unicode_word.v1") != std::string::npos);

    RunResult query = run("query --index " + dir.file("c128.idx") + " --passages " +
                          dir.file("p128.jsonl") + " --q marker2");
    CHECK(query.exit_code == 0);
    CHECK(query.output.find("s2#s0#c0") != std::string::npos);

    std::string items;
    for (int i = 0; i < 4; ++i) {
        items += R"({"item_id":"q)" + std::to_string(i) + R"(","question":"About marker)" +
                 std::to_string(i) + R"(?","options":["a","b","c","d"],"answer_key":"A","question_type":"factual","category":"X"})" +
                 "\n";
    }
    fixtures::write_file(dir.file("bench.jsonl"), items);
    fixtures::write_file(dir.file("grid.json"),
                         R"({"budget": 1024, "cells": [)"
                         R"({"backend": "bm25", "chunk_size": 128, "index": ")" +
                             dir.file("c128.idx") + R"(", "passages": ")" +
                             dir.file("p128.jsonl") +
                             R"("},)"
                             R"({"backend": "bm25", "chunk_size": 256, "index": ")" +
                             dir.file("c256.idx") + R"(", "passages": ")" +
                             dir.file("p256.jsonl") + R"("}]})");

    RunResult ablate = run("ablate --grid " + dir.file("grid.json") + " --benchmark " +
                           dir.file("bench.jsonl") + " --generator mock:A --out " +
                           dir.file("matrix.json"));
    CHECK(ablate.exit_code == 0);
    CHECK(ablate.output.find("bm25") != std::string::npos);
    std::string matrix = fixtures::read_file(dir.file("matrix.json"));
    CHECK(matrix.find("\"k\": 8") != std::string::npos);
    CHECK(matrix.find("\"k\": 4") != std::string::npos);
}

TEST_CASE("zero-shot eval with the mock generator runs hermetically") {
    fixtures::TempDir dir;
    std::string items;
    for (int i = 0; i < 4; ++i) {
        items += R"({"item_id":"i)" + std::to_string(i) +
                 R"(","question":"Q?","options":["a","b","c","d"],"answer_key":")" +
                 std::string(1, static_cast<char>('A' + i)) +
                 R"(","question_type":"factual","category":"X"})" + "\n";
    }
    fixtures::write_file(dir.file("bench.jsonl"), items);
    RunResult result = run("eval --benchmark " + dir.file("bench.jsonl") +
                           " --mode zero-shot --generator mock:B --out " + dir.file("report.json"));
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("accuracy: 25.0%") != std::string::npos);
    CHECK(fixtures::read_file(dir.file("report.json")).find("\"accuracy_pct\": 25.0") !=
          std::string::npos);
}

} // TEST_SUITE
