#include "muserag/retrieval.hpp"

#include "muserag/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace muserag {

std::size_t budget_topk(const BudgetPolicy& policy) {
    if (policy.chunk_size == 0) throw ConfigError("chunk_size must be >= 1");
    if (policy.total_token_budget < policy.chunk_size) {
        throw ConfigError("token budget " + std::to_string(policy.total_token_budget) +
                          " is smaller than chunk size " + std::to_string(policy.chunk_size));
    }
    return policy.total_token_budget / policy.chunk_size;
}

const char* to_string(RetrievalBackend backend) {
    return backend == RetrievalBackend::sparse_bm25 ? "bm25" : "dense";
}

std::optional<RetrievalBackend> parse_backend(const std::string& name) {
    if (name == "bm25" || name == "sparse" || name == "sparse_bm25") {
        return RetrievalBackend::sparse_bm25;
    }
    if (name == "dense") return RetrievalBackend::dense;
    return std::nullopt;
}

namespace {

RetrievedContext hits_to_context(const std::string& query, const std::vector<SearchHit>& hits,
                                 const std::vector<std::string>& passage_ids,
                                 const PassageStore& store) {
    RetrievedContext ctx;
    ctx.query = query;
    ctx.items.reserve(hits.size());
    for (const SearchHit& hit : hits) {
        const std::string& id = passage_ids.at(hit.passage_ord);
        const Passage* p = store.find(id);
        if (!p) throw LookupError("index references passage missing from store: " + id);
        ctx.items.push_back({*p, hit.score});
        ctx.total_tokens += p->token_count;
    }
    return ctx;
}

} // namespace

RetrievedContext retrieve(const std::string& query, const RetrievalConfig& config,
                          const IndexHandle& handle) {
    if (!handle.passages) throw ConfigError("retrieval requires a passage store");
    if (handle.passages->meta().chunk_size != config.budget.chunk_size) {
        throw ConfigError("index chunk size " +
                          std::to_string(handle.passages->meta().chunk_size) +
                          " does not match budget chunk size " +
                          std::to_string(config.budget.chunk_size));
    }
    std::size_t k = config.explicit_k ? *config.explicit_k : budget_topk(config.budget);
    if (k < 1) throw ConfigError("k must be >= 1");

    if (config.backend == RetrievalBackend::sparse_bm25) {
        if (!handle.sparse) throw ConfigError("sparse retrieval requires an inverted index");
        auto hits = handle.sparse->search(query, k);
        return hits_to_context(query, hits, handle.sparse->passage_ids(), *handle.passages);
    }

    if (!handle.dense) throw ConfigError("dense retrieval requires a vector store");
    if (!handle.embedder) throw ConfigError("dense retrieval requires an embedder");
    EmbeddingVector qvec = handle.embedder->embed({query}).at(0);
    auto hits = handle.dense->search(qvec, k);
    return hits_to_context(query, hits, handle.dense->passage_ids(), *handle.passages);
}

RetrievedContext gold_context(const std::vector<std::string>& gold_passage_ids,
                              const PassageStore& store) {
    RetrievedContext ctx;
    ctx.items.reserve(gold_passage_ids.size());
    for (const std::string& id : gold_passage_ids) {
        const Passage* p = store.find(id);
        if (!p) throw LookupError("gold passage not in store: " + id);
        ctx.items.push_back({*p, 0.0});
        ctx.total_tokens += p->token_count;
    }
    return ctx;
}

LatencyReport latency_from_samples(std::vector<double> samples_ms) {
    LatencyReport report;
    report.query_count = samples_ms.size();
    if (samples_ms.empty()) return report;

    double total = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0);
    report.mean_ms = total / static_cast<double>(samples_ms.size());
    std::sort(samples_ms.begin(), samples_ms.end());
    auto nearest_rank = [&](double q) {
        std::size_t rank = static_cast<std::size_t>(
            std::ceil(q * static_cast<double>(samples_ms.size())));
        if (rank < 1) rank = 1;
        return samples_ms[rank - 1];
    };
    report.p50_ms = nearest_rank(0.50);
    report.p95_ms = nearest_rank(0.95);
    report.queries_per_second =
        total > 0.0 ? static_cast<double>(samples_ms.size()) * 1000.0 / total : 0.0;
    return report;
}

LatencyReport measure_retrieval_latency(const std::vector<std::string>& queries,
                                        const RetrievalConfig& config,
                                        const IndexHandle& handle) {
    if (queries.empty()) throw InputError("latency measurement requires at least one query");
    std::vector<double> samples;
    samples.reserve(queries.size());
    for (const std::string& query : queries) {
        auto t0 = std::chrono::steady_clock::now();
        (void)retrieve(query, config, handle);
        auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return latency_from_samples(std::move(samples));
}

} // namespace muserag
