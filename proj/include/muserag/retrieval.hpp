#pragma once

#include "muserag/corpus.hpp"
#include "muserag/dense_index.hpp"
#include "muserag/sparse_index.hpp"

#include <optional>
#include <string>
#include <vector>

namespace muserag {

struct BudgetPolicy {
    std::size_t total_token_budget = 1024;
    std::size_t chunk_size = 128;
};

// k = floor(budget / chunk_size); throws ConfigError when budget < chunk_size.
std::size_t budget_topk(const BudgetPolicy& policy);

enum class RetrievalBackend { sparse_bm25, dense };

const char* to_string(RetrievalBackend backend);
std::optional<RetrievalBackend> parse_backend(const std::string& name);

struct RetrievalConfig {
    RetrievalBackend backend = RetrievalBackend::sparse_bm25;
    BudgetPolicy budget;
    std::optional<std::size_t> explicit_k;
};

struct ScoredPassage {
    Passage passage;
    double score = 0.0;
};

// Top-k context for one query. Items arrive ranked (score descending, ties by
// passage_id); total_tokens stays within the policy budget for derived k.
struct RetrievedContext {
    std::string query;
    std::vector<ScoredPassage> items;
    std::size_t total_tokens = 0;
};

// Everything a retrieval call may need. Sparse runs need {sparse, passages};
// dense runs need {dense, embedder, passages}.
struct IndexHandle {
    const InvertedIndex* sparse = nullptr;
    const VectorStore* dense = nullptr;
    Embedder* embedder = nullptr;
    const PassageStore* passages = nullptr;
};

RetrievedContext retrieve(const std::string& query, const RetrievalConfig& config,
                          const IndexHandle& handle);

// Builds a context holding the given passages verbatim, in list order.
// Missing ids raise LookupError naming the id.
RetrievedContext gold_context(const std::vector<std::string>& gold_passage_ids,
                              const PassageStore& store);

struct LatencyReport {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double queries_per_second = 0.0;
    std::size_t query_count = 0;
};

LatencyReport latency_from_samples(std::vector<double> samples_ms);

// Wall-clock timing of retrieve() alone, one sample per query.
LatencyReport measure_retrieval_latency(const std::vector<std::string>& queries,
                                        const RetrievalConfig& config, const IndexHandle& handle);

} // namespace muserag
