#pragma once

#include "muserag/generation.hpp"
#include "muserag/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace muserag {

enum class QuestionType { factual, contextual };

const char* to_string(QuestionType type);
std::optional<QuestionType> parse_question_type(const std::string& name);

struct BenchmarkItem {
    std::string item_id;
    std::string question;
    std::vector<std::string> options; // exactly 4, in A..D order
    char answer_key = 'A';
    QuestionType question_type = QuestionType::factual;
    std::string category;
    std::optional<bool> seen;
    std::vector<std::string> gold_passage_ids; // empty when absent
};

std::vector<BenchmarkItem> load_benchmark(const std::string& path);
void save_benchmark(const std::vector<BenchmarkItem>& items, const std::string& path);
nlohmann::json benchmark_item_to_json(const BenchmarkItem& item);

enum class EvalMode { zero_shot, rag, gold_context };

const char* to_string(EvalMode mode);
std::optional<EvalMode> parse_eval_mode(const std::string& name);

struct ItemVerdict {
    std::string item_id;
    std::optional<char> predicted;
    bool format_ok = false;
    bool correct = false;
    std::string error; // empty when the item was generated and scored
    double retrieval_ms = 0.0;
};

struct EvalReport {
    EvalMode mode = EvalMode::zero_shot;
    bool partial = false;           // true when any item hit a generation error
    std::size_t total = 0;
    std::size_t scored = 0;         // total minus errored items
    std::size_t correct = 0;
    std::size_t format_deviations = 0;
    std::size_t generation_errors = 0;
    std::vector<ItemVerdict> verdicts; // ascending item_id
    std::optional<LatencyReport> retrieval_latency;

    double accuracy_pct() const; // correct / scored * 100
};

struct EvalOptions {
    EvalMode mode = EvalMode::zero_shot;
    RetrievalConfig retrieval;
    PromptTemplate prompt = PromptTemplate::default_mcq();
    std::size_t workers = 1;
    bool include_options_in_query = false; // q = question stem only by default
};

EvalReport evaluate(const std::vector<BenchmarkItem>& items, const EvalOptions& options,
                    Generator& generator, const IndexHandle& handle);

enum class BreakdownAxis { type, category, seen };

struct BucketAccuracy {
    std::string bucket;
    std::size_t n = 0;
    std::size_t correct = 0;

    double accuracy_pct() const;
};

// Buckets partition the scored items; errored items are left out of every
// bucket so bucket counts always sum to `scored`.
std::vector<BucketAccuracy> breakdown(const EvalReport& report,
                                      const std::vector<BenchmarkItem>& items,
                                      BreakdownAxis axis);

nlohmann::json report_to_json(const EvalReport& report, const std::vector<BenchmarkItem>& items,
                              bool include_timing);
std::string render_report(const EvalReport& report, const std::vector<BenchmarkItem>& items);

// One retriever configuration of the ablation sweep.
struct AblationCell {
    RetrievalBackend backend = RetrievalBackend::sparse_bm25;
    std::size_t chunk_size = 128;
    std::string index_path;    // sparse backend
    std::string vectors_path;  // dense backend
    std::string passages_path;
    std::string embedding;     // embedder spec for dense query encoding

    std::string label() const;
};

struct AblationGrid {
    std::size_t budget = 1024;
    std::vector<AblationCell> cells;
};

AblationGrid load_ablation_grid(const std::string& path);

struct AblationResult {
    AblationCell cell;
    std::size_t k = 0;
    EvalReport report;
};

using EmbedderFactory = std::function<std::unique_ptr<Embedder>(const AblationCell&)>;

std::vector<AblationResult> run_ablation(const AblationGrid& grid,
                                         const std::vector<BenchmarkItem>& items,
                                         Generator& generator, const EvalOptions& base_options,
                                         const EmbedderFactory& make_embedder);

nlohmann::json ablation_to_json(const std::vector<AblationResult>& results,
                                const std::vector<BenchmarkItem>& items, std::size_t budget,
                                bool include_timing);
std::string render_ablation(const std::vector<AblationResult>& results,
                            const std::vector<BenchmarkItem>& items);

} // namespace muserag
