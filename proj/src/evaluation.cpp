#include "muserag/evaluation.hpp"

#include "muserag/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace muserag {

using json = nlohmann::json;

const char* to_string(QuestionType type) {
    return type == QuestionType::factual ? "factual" : "contextual";
}

std::optional<QuestionType> parse_question_type(const std::string& name) {
    if (name == "factual") return QuestionType::factual;
    if (name == "contextual") return QuestionType::contextual;
    return std::nullopt;
}

const char* to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::zero_shot: return "zero-shot";
        case EvalMode::rag: return "rag";
        case EvalMode::gold_context: return "gold";
    }
    return "zero-shot";
}

std::optional<EvalMode> parse_eval_mode(const std::string& name) {
    if (name == "zero-shot" || name == "zero_shot") return EvalMode::zero_shot;
    if (name == "rag") return EvalMode::rag;
    if (name == "gold" || name == "gold-context" || name == "gold_context") {
        return EvalMode::gold_context;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Benchmark files
// ---------------------------------------------------------------------------

json benchmark_item_to_json(const BenchmarkItem& item) {
    json record = {
        {"item_id", item.item_id},
        {"question", item.question},
        {"options", item.options},
        {"answer_key", std::string(1, item.answer_key)},
        {"question_type", to_string(item.question_type)},
        {"category", item.category},
    };
    if (item.seen.has_value()) record["seen"] = *item.seen;
    if (!item.gold_passage_ids.empty()) record["gold_passage_ids"] = item.gold_passage_ids;
    return record;
}

std::vector<BenchmarkItem> load_benchmark(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open benchmark file: " + path);

    std::vector<BenchmarkItem> items;
    std::map<std::string, std::size_t> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        BenchmarkItem item;
        try {
            json record = json::parse(line);
            item.item_id = record.at("item_id").get<std::string>();
            item.question = record.at("question").get<std::string>();
            item.options = record.at("options").get<std::vector<std::string>>();
            std::string key = record.at("answer_key").get<std::string>();
            if (key.size() != 1 || key[0] < 'A' || key[0] > 'D') {
                throw ParseError("benchmark line " + std::to_string(line_no) +
                                 ": answer_key must be one of A-D");
            }
            item.answer_key = key[0];
            std::string type = record.at("question_type").get<std::string>();
            auto parsed_type = parse_question_type(type);
            if (!parsed_type) {
                throw ParseError("benchmark line " + std::to_string(line_no) +
                                 ": unknown question_type \"" + type + "\"");
            }
            item.question_type = *parsed_type;
            item.category = record.value("category", std::string{});
            if (record.contains("seen")) item.seen = record.at("seen").get<bool>();
            if (record.contains("gold_passage_ids")) {
                item.gold_passage_ids =
                    record.at("gold_passage_ids").get<std::vector<std::string>>();
            }
        } catch (const ParseError&) {
            throw;
        } catch (const json::exception& e) {
            throw ParseError("benchmark line " + std::to_string(line_no) + ": " + e.what());
        }
        if (item.options.size() != 4) {
            throw ParseError("benchmark line " + std::to_string(line_no) + ": expected 4 options, got " +
                             std::to_string(item.options.size()));
        }
        auto [it, inserted] = seen_ids.emplace(item.item_id, line_no);
        if (!inserted) {
            throw ParseError("benchmark line " + std::to_string(line_no) + ": duplicate item_id \"" +
                             item.item_id + "\" (first at line " + std::to_string(it->second) + ")");
        }
        items.push_back(std::move(item));
    }
    return items;
}

void save_benchmark(const std::vector<BenchmarkItem>& items, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write benchmark file: " + path);
    for (const BenchmarkItem& item : items) out << benchmark_item_to_json(item).dump() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double EvalReport::accuracy_pct() const {
    if (scored == 0) return 0.0;
    return static_cast<double>(correct) * 100.0 / static_cast<double>(scored);
}

double BucketAccuracy::accuracy_pct() const {
    if (n == 0) return 0.0;
    return static_cast<double>(correct) * 100.0 / static_cast<double>(n);
}

namespace {

std::string item_query(const BenchmarkItem& item, bool include_options) {
    if (!include_options) return item.question;
    std::string q = item.question;
    for (const std::string& option : item.options) {
        q += ' ';
        q += option;
    }
    return q;
}

ItemVerdict evaluate_one(const BenchmarkItem& item, const EvalOptions& options,
                         Generator& generator, const IndexHandle& handle) {
    ItemVerdict verdict;
    verdict.item_id = item.item_id;

    RetrievedContext context;
    const RetrievedContext* context_ptr = nullptr;
    try {
        if (options.mode == EvalMode::rag) {
            auto t0 = std::chrono::steady_clock::now();
            context = retrieve(item_query(item, options.include_options_in_query),
                               options.retrieval, handle);
            auto t1 = std::chrono::steady_clock::now();
            verdict.retrieval_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            context_ptr = &context;
        } else if (options.mode == EvalMode::gold_context) {
            context = gold_context(item.gold_passage_ids, *handle.passages);
            context_ptr = &context;
        }

        std::string prompt =
            assemble_prompt(item.question, item.options, context_ptr, options.prompt);
        std::string completion = generator.complete(options.prompt.system_text, prompt);
        ChoiceVerdict choice = parse_choice(completion);
        verdict.predicted = choice.parsed;
        verdict.format_ok = choice.format_ok;
        verdict.correct = choice.format_ok && choice.parsed && *choice.parsed == item.answer_key;
    } catch (const LookupError& e) {
        verdict.error = e.what();
    } catch (const UnavailableError& e) {
        verdict.error = e.what();
    } catch (const ProtocolError& e) {
        verdict.error = e.what();
    }
    return verdict;
}

// Configuration problems must surface once, up front, not as one error per
// item inside a worker thread.
void check_mode_prerequisites(const std::vector<BenchmarkItem>& items, const EvalOptions& options,
                              const IndexHandle& handle) {
    if (options.mode == EvalMode::gold_context) {
        if (!handle.passages) throw ConfigError("gold-context evaluation requires a passage store");
        for (const BenchmarkItem& item : items) {
            if (item.gold_passage_ids.empty()) {
                throw InputError("gold-context evaluation requires gold_passage_ids on every "
                                 "item; missing on \"" + item.item_id + "\"");
            }
        }
        return;
    }
    if (options.mode != EvalMode::rag) return;

    if (!handle.passages) throw ConfigError("retrieval requires a passage store");
    if (handle.passages->meta().chunk_size != options.retrieval.budget.chunk_size) {
        throw ConfigError("index chunk size " +
                          std::to_string(handle.passages->meta().chunk_size) +
                          " does not match budget chunk size " +
                          std::to_string(options.retrieval.budget.chunk_size));
    }
    if (!options.retrieval.explicit_k) (void)budget_topk(options.retrieval.budget);
    if (options.retrieval.backend == RetrievalBackend::sparse_bm25) {
        if (!handle.sparse) throw ConfigError("sparse retrieval requires an inverted index");
    } else {
        if (!handle.dense) throw ConfigError("dense retrieval requires a vector store");
        if (!handle.embedder) throw ConfigError("dense retrieval requires an embedder");
    }
}

} // namespace

EvalReport evaluate(const std::vector<BenchmarkItem>& items, const EvalOptions& options,
                    Generator& generator, const IndexHandle& handle) {
    check_mode_prerequisites(items, options, handle);

    // Items are processed in ascending item_id order so logs and reports are
    // reproducible regardless of file order or worker interleaving.
    std::vector<const BenchmarkItem*> ordered;
    ordered.reserve(items.size());
    for (const BenchmarkItem& item : items) ordered.push_back(&item);
    std::sort(ordered.begin(), ordered.end(),
              [](const BenchmarkItem* a, const BenchmarkItem* b) { return a->item_id < b->item_id; });

    std::vector<ItemVerdict> verdicts(ordered.size());
    std::size_t workers = std::max<std::size_t>(1, options.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            verdicts[i] = evaluate_one(*ordered[i], options, generator, handle);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= ordered.size()) break;
                    try {
                        verdicts[i] = evaluate_one(*ordered[i], options, generator, handle);
                    } catch (const std::exception& e) {
                        // Nothing may escape a worker thread.
                        verdicts[i].item_id = ordered[i]->item_id;
                        verdicts[i].error = e.what();
                    }
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    EvalReport report;
    report.mode = options.mode;
    report.total = verdicts.size();
    std::vector<double> retrieval_samples;
    for (const ItemVerdict& v : verdicts) {
        if (!v.error.empty()) {
            ++report.generation_errors;
            continue;
        }
        ++report.scored;
        if (v.correct) ++report.correct;
        if (!v.format_ok) ++report.format_deviations;
        if (options.mode == EvalMode::rag) retrieval_samples.push_back(v.retrieval_ms);
    }
    report.partial = report.generation_errors > 0;
    if (options.mode == EvalMode::rag && !retrieval_samples.empty()) {
        report.retrieval_latency = latency_from_samples(std::move(retrieval_samples));
    }
    report.verdicts = std::move(verdicts);
    return report;
}

// ---------------------------------------------------------------------------
// Breakdowns and rendering
// ---------------------------------------------------------------------------

std::vector<BucketAccuracy> breakdown(const EvalReport& report,
                                      const std::vector<BenchmarkItem>& items,
                                      BreakdownAxis axis) {
    std::map<std::string, const BenchmarkItem*> by_id;
    for (const BenchmarkItem& item : items) by_id[item.item_id] = &item;

    std::map<std::string, BucketAccuracy> buckets;
    for (const ItemVerdict& verdict : report.verdicts) {
        if (!verdict.error.empty()) continue;
        auto it = by_id.find(verdict.item_id);
        if (it == by_id.end()) {
            throw InputError("verdict for unknown item \"" + verdict.item_id + "\"");
        }
        const BenchmarkItem& item = *it->second;

        std::string bucket;
        switch (axis) {
            case BreakdownAxis::type: bucket = to_string(item.question_type); break;
            case BreakdownAxis::category: bucket = item.category; break;
            case BreakdownAxis::seen:
                if (!item.seen.has_value()) {
                    throw InputError("seen flag missing on item \"" + item.item_id + "\"");
                }
                bucket = *item.seen ? "seen" : "unseen";
                break;
        }
        BucketAccuracy& acc = buckets[bucket];
        acc.bucket = bucket;
        ++acc.n;
        if (verdict.correct) ++acc.correct;
    }

    std::vector<BucketAccuracy> out;
    out.reserve(buckets.size());
    for (auto& [_, acc] : buckets) out.push_back(acc);
    return out;
}

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

json buckets_to_json(const std::vector<BucketAccuracy>& buckets) {
    json out = json::array();
    for (const BucketAccuracy& b : buckets) {
        out.push_back({{"bucket", b.bucket},
                       {"n", b.n},
                       {"correct", b.correct},
                       {"accuracy_pct", round1(b.accuracy_pct())}});
    }
    return out;
}

bool all_have_seen(const std::vector<BenchmarkItem>& items) {
    return std::all_of(items.begin(), items.end(),
                       [](const BenchmarkItem& i) { return i.seen.has_value(); });
}

} // namespace

json report_to_json(const EvalReport& report, const std::vector<BenchmarkItem>& items,
                    bool include_timing) {
    json out = {
        {"mode", to_string(report.mode)},
        {"partial", report.partial},
        {"counts",
         {{"total", report.total},
          {"scored", report.scored},
          {"correct", report.correct},
          {"format_deviations", report.format_deviations},
          {"generation_errors", report.generation_errors}}},
        {"accuracy_pct", round1(report.accuracy_pct())},
    };
    out["breakdowns"]["type"] = buckets_to_json(breakdown(report, items, BreakdownAxis::type));
    out["breakdowns"]["category"] =
        buckets_to_json(breakdown(report, items, BreakdownAxis::category));
    if (all_have_seen(items)) {
        out["breakdowns"]["seen"] = buckets_to_json(breakdown(report, items, BreakdownAxis::seen));
    }

    json verdicts = json::array();
    for (const ItemVerdict& v : report.verdicts) {
        json record = {{"item_id", v.item_id},
                       {"format_ok", v.format_ok},
                       {"correct", v.correct}};
        record["predicted"] = v.predicted ? json(std::string(1, *v.predicted)) : json(nullptr);
        if (!v.error.empty()) record["error"] = v.error;
        verdicts.push_back(std::move(record));
    }
    out["items"] = std::move(verdicts);

    if (include_timing && report.retrieval_latency) {
        const LatencyReport& lat = *report.retrieval_latency;
        out["retrieval_latency"] = {{"mean_ms", lat.mean_ms},
                                    {"p50_ms", lat.p50_ms},
                                    {"p95_ms", lat.p95_ms},
                                    {"queries_per_second", lat.queries_per_second},
                                    {"query_count", lat.query_count}};
    }
    return out;
}

std::string render_report(const EvalReport& report, const std::vector<BenchmarkItem>& items) {
    std::ostringstream out;
    out << "mode: " << to_string(report.mode) << (report.partial ? " (PARTIAL RUN)" : "") << '\n';
    out << "items: " << report.total << "  scored: " << report.scored
        << "  correct: " << report.correct
        << "  format deviations: " << report.format_deviations
        << "  generation errors: " << report.generation_errors << '\n';
    out << "accuracy: " << format_pct(report.accuracy_pct()) << "%\n";

    auto print_axis = [&](const char* name, BreakdownAxis axis) {
        out << name << ":\n";
        for (const BucketAccuracy& b : breakdown(report, items, axis)) {
            out << "  " << b.bucket << ": " << format_pct(b.accuracy_pct()) << "% (" << b.correct
                << "/" << b.n << ")\n";
        }
    };
    print_axis("by type", BreakdownAxis::type);
    print_axis("by category", BreakdownAxis::category);
    if (all_have_seen(items)) print_axis("by seen", BreakdownAxis::seen);

    if (report.retrieval_latency) {
        const LatencyReport& lat = *report.retrieval_latency;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "retrieval latency: mean %.3f ms, p50 %.3f ms, p95 %.3f ms, %.1f q/s\n",
                      lat.mean_ms, lat.p50_ms, lat.p95_ms, lat.queries_per_second);
        out << buf;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

std::string AblationCell::label() const {
    return std::string(to_string(backend)) + "/" + std::to_string(chunk_size);
}

AblationGrid load_ablation_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file: " + path);
    json spec;
    try {
        spec = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad grid file: ") + e.what());
    }

    AblationGrid grid;
    grid.budget = spec.value("budget", std::size_t{1024});
    for (const json& cell_spec : spec.value("cells", json::array())) {
        AblationCell cell;
        std::string backend = cell_spec.at("backend").get<std::string>();
        auto parsed = parse_backend(backend);
        if (!parsed) throw ParseError("grid cell has unknown backend \"" + backend + "\"");
        cell.backend = *parsed;
        cell.chunk_size = cell_spec.at("chunk_size").get<std::size_t>();
        cell.index_path = cell_spec.value("index", std::string{});
        cell.vectors_path = cell_spec.value("vectors", std::string{});
        cell.passages_path = cell_spec.at("passages").get<std::string>();
        cell.embedding = cell_spec.value("embedding", std::string{});
        grid.cells.push_back(std::move(cell));
    }
    return grid;
}

std::vector<AblationResult> run_ablation(const AblationGrid& grid,
                                         const std::vector<BenchmarkItem>& items,
                                         Generator& generator, const EvalOptions& base_options,
                                         const EmbedderFactory& make_embedder) {
    // Validate the whole grid up front so a missing artifact fails fast.
    for (const AblationCell& cell : grid.cells) {
        const std::string& data_path =
            cell.backend == RetrievalBackend::sparse_bm25 ? cell.index_path : cell.vectors_path;
        if (data_path.empty() || !std::filesystem::exists(data_path)) {
            throw ConfigError("grid cell " + cell.label() + ": missing index \"" + data_path +
                              "\"");
        }
        if (cell.passages_path.empty() || !std::filesystem::exists(cell.passages_path)) {
            throw ConfigError("grid cell " + cell.label() + ": missing passage store \"" +
                              cell.passages_path + "\"");
        }
    }

    std::vector<AblationResult> results;
    results.reserve(grid.cells.size());
    for (const AblationCell& cell : grid.cells) {
        PassageStore store = PassageStore::load(cell.passages_path);

        EvalOptions options = base_options;
        options.mode = EvalMode::rag;
        options.retrieval.backend = cell.backend;
        options.retrieval.budget = {grid.budget, cell.chunk_size};
        options.retrieval.explicit_k.reset();

        IndexHandle handle;
        handle.passages = &store;
        InvertedIndex sparse;
        VectorStore dense;
        std::unique_ptr<Embedder> embedder;
        if (cell.backend == RetrievalBackend::sparse_bm25) {
            sparse = InvertedIndex::load(cell.index_path, store.meta().tokenizer);
            handle.sparse = &sparse;
        } else {
            dense = VectorStore::load(cell.vectors_path);
            embedder = make_embedder(cell);
            handle.dense = &dense;
            handle.embedder = embedder.get();
        }

        AblationResult result;
        result.cell = cell;
        result.k = budget_topk(options.retrieval.budget);
        result.report = evaluate(items, options, generator, handle);
        results.push_back(std::move(result));
    }
    return results;
}

json ablation_to_json(const std::vector<AblationResult>& results,
                      const std::vector<BenchmarkItem>& items, std::size_t budget,
                      bool include_timing) {
    json out = {{"budget", budget}, {"cells", json::array()}};
    for (const AblationResult& result : results) {
        out["cells"].push_back({{"backend", to_string(result.cell.backend)},
                                {"chunk_size", result.cell.chunk_size},
                                {"k", result.k},
                                {"report", report_to_json(result.report, items, include_timing)}});
    }
    return out;
}

std::string render_ablation(const std::vector<AblationResult>& results,
                            const std::vector<BenchmarkItem>& items) {
    std::ostringstream out;
    out << "backend   size   k   factual   contextual   all\n";
    for (const AblationResult& result : results) {
        std::map<std::string, double> by_type;
        for (const BucketAccuracy& b : breakdown(result.report, items, BreakdownAxis::type)) {
            by_type[b.bucket] = b.accuracy_pct();
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-9s %4zu %3zu   %7s   %10s   %s\n",
                      to_string(result.cell.backend), result.cell.chunk_size, result.k,
                      format_pct(by_type["factual"]).c_str(),
                      format_pct(by_type["contextual"]).c_str(),
                      format_pct(result.report.accuracy_pct()).c_str());
        out << buf;
    }
    return out.str();
}

} // namespace muserag
