#include "muserag/dense_index.hpp"

#include "muserag/errors.hpp"
#include "support/fixtures.hpp"
#include "support/mock_http.hpp"
#include "support/oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace muserag;
using fixtures::MockServer;
using fixtures::TempDir;
using json = nlohmann::json;

namespace {

EmbeddingVector vec(std::initializer_list<float> values) { return EmbeddingVector{values}; }

VectorStore two_vector_store() {
    VectorStore store(2, "test");
    store.add("p0#s0#c0", vec({1.0f, 0.0f}));
    store.add("p1#s0#c0", vec({0.0f, 1.0f}));
    store.canonicalize();
    return store;
}

} // namespace

TEST_SUITE("dense_index") {

TEST_CASE("cosine similarity basics") {
    CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
    CHECK(cosine_similarity(vec({1, 1}), vec({2, 2})) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), InputError);
    CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), InputError);
}

TEST_CASE("cosine similarity is symmetric") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> value(-2.0f, 2.0f);
    for (int round = 0; round < 100; ++round) {
        EmbeddingVector a, b;
        for (int i = 0; i < 8; ++i) {
            a.values.push_back(value(rng));
            b.values.push_back(value(rng));
        }
        a.values[0] += 0.1f; // keep away from all-zero
        b.values[0] += 0.1f;
        CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)));
    }
}

TEST_CASE("search scans exactly and truncates") {
    VectorStore store = two_vector_store();

    auto top = store.search(vec({1, 0}), 1);
    REQUIRE(top.size() == 1);
    CHECK(store.passage_ids()[top[0].passage_ord] == "p0#s0#c0");
    CHECK(top[0].score == doctest::Approx(1.0));

    auto swapped = store.search(vec({0.6f, 0.8f}), 2);
    REQUIRE(swapped.size() == 2);
    CHECK(store.passage_ids()[swapped[0].passage_ord] == "p1#s0#c0");

    CHECK(store.search(vec({1, 0}), 5).size() == 2);
    CHECK_THROWS_AS(store.search(vec({1, 0, 0}), 1), InputError);
    CHECK_THROWS_AS(store.search(vec({0, 0}), 1), InputError);
}

TEST_CASE("ranking is invariant to positive query scaling") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> value(-1.0f, 1.0f);
    VectorStore store(16, "test");
    for (int i = 0; i < 40; ++i) {
        EmbeddingVector v;
        for (int d = 0; d < 16; ++d) v.values.push_back(value(rng));
        v.values[0] += 1.5f;
        char id[24];
        std::snprintf(id, sizeof(id), "p%03d#s0#c0", i);
        store.add(id, v);
    }
    store.canonicalize();

    for (int round = 0; round < 20; ++round) {
        EmbeddingVector q;
        for (int d = 0; d < 16; ++d) q.values.push_back(value(rng));
        q.values[0] += 1.5f;
        EmbeddingVector scaled = q;
        for (float& x : scaled.values) x *= 7.25f;

        auto base = store.search(q, 40);
        auto redone = store.search(scaled, 40);
        REQUIRE(base.size() == redone.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(base[i].passage_ord == redone[i].passage_ord);
        }
    }
}

TEST_CASE("search matches the double-loop reference") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<float> value(-1.0f, 1.0f);
    for (std::size_t dim : {4u, 16u}) {
        VectorStore store(dim, "test");
        std::vector<std::vector<float>> rows;
        for (int i = 0; i < 200; ++i) {
            std::vector<float> row;
            for (std::size_t d = 0; d < dim; ++d) row.push_back(value(rng));
            row[0] += 1.1f;
            char id[24];
            std::snprintf(id, sizeof(id), "p%04d#s0#c0", i);
            store.add(id, EmbeddingVector{row});
            rows.push_back(std::move(row));
        }
        store.canonicalize();

        for (int q = 0; q < 10; ++q) {
            std::vector<float> query;
            for (std::size_t d = 0; d < dim; ++d) query.push_back(value(rng));
            query[0] += 1.1f;
            auto hits = store.search(EmbeddingVector{query}, 25);
            auto expected = oracle::cosine_rank(rows, query, 25);
            REQUIRE(hits.size() == expected.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
                CHECK(hits[i].passage_ord == expected[i].index);
                CHECK(hits[i].score == doctest::Approx(expected[i].score).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("equal similarities fall back to passage order") {
    VectorStore store(2, "test");
    store.add("m#s0#c0", vec({3.0f, 0.0f}));
    store.add("a#s0#c0", vec({2.0f, 0.0f})); // same direction, same cosine
    store.add("z#s0#c0", vec({0.0f, 1.0f}));
    store.canonicalize();

    auto hits = store.search(vec({1.0f, 0.0f}), 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].score == hits[1].score);
    CHECK(hits[0].passage_ord < hits[1].passage_ord);
    CHECK(store.passage_ids()[hits[0].passage_ord] == "a#s0#c0");
}

TEST_CASE("vector file round-trips and rejects damage") {
    TempDir dir;
    VectorStore store = two_vector_store();
    store.save(dir.file("vec.bin"));

    VectorStore loaded = VectorStore::load(dir.file("vec.bin"));
    CHECK(loaded.size() == 2);
    CHECK(loaded.dim() == 2);
    CHECK(loaded.backend() == "test");
    CHECK(loaded.vector(0).values == store.vector(0).values);

    std::string bytes = fixtures::read_file(dir.file("vec.bin"));
    fixtures::write_file(dir.file("trunc.bin"), bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(VectorStore::load(dir.file("trunc.bin")), FormatError);

    fixtures::write_file(dir.file("junk.bin"), "whatever\n");
    CHECK_THROWS_AS(VectorStore::load(dir.file("junk.bin")), FormatError);
}

TEST_CASE("duplicate ids are rejected at canonicalization") {
    VectorStore store(2, "test");
    store.add("dup#s0#c0", vec({1, 0}));
    store.add("dup#s0#c0", vec({0, 1}));
    CHECK_THROWS_AS(store.canonicalize(), IntegrityError);
}

TEST_CASE("embedding client round-trips a mock service") {
    MockServer mock;
    mock.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        json vectors = json::array();
        for (std::size_t i = 0; i < body["input"].size(); ++i) {
            vectors.push_back({0.1 * static_cast<double>(i + 1), 0.2, 0.3, 0.4});
        }
        res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    mock.start();

    EmbeddingClientConfig config;
    config.endpoint = mock.url("/embed");
    config.model = "test-embed";
    config.max_batch = 2;
    auto vectors = embed_texts(config, {"one", "two", "three"});
    REQUIRE(vectors.size() == 3);
    CHECK(vectors[0].dim() == 4);
    CHECK(vectors[0].values[0] == doctest::Approx(0.1f));
    CHECK(vectors[2].values[0] == doctest::Approx(0.1f)); // batches of 2 then 1

    CHECK_THROWS_AS(embed_texts(config, {}), InputError);
}

TEST_CASE("embedding client flags contract violations") {
    MockServer mock;
    mock.server().Post("/short", [](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        json vectors = json::array();
        for (std::size_t i = 0; i + 1 < body["input"].size(); ++i) {
            vectors.push_back({0.1, 0.2});
        }
        res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    mock.server().Post("/ragged", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"vectors", {{0.1, 0.2}, {0.1, 0.2, 0.3}}}}.dump(),
                        "application/json");
    });
    mock.start();

    EmbeddingClientConfig config;
    config.endpoint = mock.url("/short");
    config.max_retries = 0;
    CHECK_THROWS_AS(embed_texts(config, {"a", "b", "c", "d"}), ProtocolError);

    config.endpoint = mock.url("/ragged");
    CHECK_THROWS_AS(embed_texts(config, {"a", "b"}), ProtocolError);
}

TEST_CASE("embedding client retries transport failures") {
    MockServer mock;
    std::atomic<int> calls{0};
    mock.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) == 0) {
            res.status = 503;
            return;
        }
        res.set_content(json{{"vectors", {{1.0, 0.0}}}}.dump(), "application/json");
    });
    mock.start();

    EmbeddingClientConfig config;
    config.endpoint = mock.url("/flaky");
    config.backoff_ms = 1;
    auto vectors = embed_texts(config, {"text"});
    REQUIRE(vectors.size() == 1);
    CHECK(calls.load() == 2);

    EmbeddingClientConfig dead;
    dead.endpoint = "http://127.0.0.1:9/embed";
    dead.max_retries = 1;
    dead.backoff_ms = 1;
    dead.timeout_ms = 200;
    CHECK_THROWS_AS(embed_texts(dead, {"text"}), UnavailableError);
}

TEST_CASE("hash embedder is deterministic and term-driven") {
    HashEmbedder embedder(32);
    auto once = embedder.embed({"miles davis trumpet", "miles davis trumpet", "polka accordion"});
    REQUIRE(once.size() == 3);
    CHECK(once[0].values == once[1].values);
    CHECK(once[0].values != once[2].values);
    CHECK(once[0].dim() == 32);

    auto empty = embedder.embed({""});
    double norm = 0.0;
    for (float v : empty[0].values) norm += v * v;
    CHECK(norm > 0.0);
}

} // TEST_SUITE
