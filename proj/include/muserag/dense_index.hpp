#pragma once

#include "muserag/sparse_index.hpp" // SearchHit

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace muserag {

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
};

// (a . b) / (|a| |b|), computed in double precision. Throws InputError on
// dimension mismatch or an all-zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Fixed-dimension vector per passage, ordered canonically by passage_id.
// Immutable once built; exact brute-force search only.
class VectorStore {
public:
    VectorStore() = default;
    VectorStore(std::size_t dim, std::string backend_label)
        : dim_(dim), backend_(std::move(backend_label)) {}

    void add(const std::string& passage_id, EmbeddingVector vec);
    // Sorts vectors by passage_id; call once after the last add.
    void canonicalize();

    std::size_t size() const { return passage_ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::string& backend() const { return backend_; }
    const std::vector<std::string>& passage_ids() const { return passage_ids_; }
    EmbeddingVector vector(std::uint32_t ord) const;

    // Ranked by similarity descending, ties by passage_ord ascending; returns
    // min(k, size()) hits from an exhaustive scan.
    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const;

    void save(const std::string& path) const;
    static VectorStore load(const std::string& path);

private:
    std::size_t dim_ = 0;
    std::string backend_;
    std::vector<std::string> passage_ids_;
    std::vector<float> data_; // row-major, size() * dim_
};

struct EmbeddingClientConfig {
    std::string endpoint; // full URL, e.g. http://host:port/embed
    std::string model;
    std::string api_key;
    int timeout_ms = 30000;
    std::size_t max_batch = 16;
    int max_retries = 3;
    int backoff_ms = 100;
};

// POSTs {model, input: [texts]} and expects {vectors: [[reals]]}. One vector
// per input, order preserved. Throws UnavailableError when the service stays
// unreachable, ProtocolError when the response violates the contract.
std::vector<EmbeddingVector> embed_texts(const EmbeddingClientConfig& config,
                                         const std::vector<std::string>& texts);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual std::string backend_label() const = 0;
};

class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(EmbeddingClientConfig config) : config_(std::move(config)) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        return embed_texts(config_, texts);
    }
    std::string backend_label() const override { return "http:" + config_.model; }

private:
    EmbeddingClientConfig config_;
};

// Deterministic local embedding backend: hashed bag of terms, L2-normalized.
// Lets dense-retrieval runs work without any service.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 64) : dim_(dim) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::string backend_label() const override { return "hash:" + std::to_string(dim_); }

private:
    std::size_t dim_;
};

} // namespace muserag
