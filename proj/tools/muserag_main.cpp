// muserag — retrieval-augmented generation toolkit for music QA corpora.
//
// Subcommands: ingest, index build/stats, stats, embed, query, bench-latency,
// eval, ablate, bench build, export-finetune. All subcommands run hermetically
// with the built-in mock generator/embedding profiles.

#include "muserag/benchgen.hpp"
#include "muserag/corpus.hpp"
#include "muserag/dense_index.hpp"
#include "muserag/errors.hpp"
#include "muserag/evaluation.hpp"
#include "muserag/finetune_export.hpp"
#include "muserag/generation.hpp"
#include "muserag/profiles.hpp"
#include "muserag/retrieval.hpp"
#include "muserag/sparse_index.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace muserag;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

ProfilesConfig load_config(const GlobalOptions& global) {
    std::string path = global.config_path;
    if (path.empty()) {
        const char* env = std::getenv("MUSERAG_CONFIG");
        if (env && *env) path = env;
    }
    if (path.empty()) return {};
    return load_profiles(path);
}

std::string config_hash(int argc, char** argv, const GlobalOptions& global) {
    std::string blob;
    for (int i = 0; i < argc; ++i) {
        blob += argv[i];
        blob += '\n';
    }
    if (!global.config_path.empty() && std::filesystem::exists(global.config_path)) {
        std::ifstream in(global.config_path, std::ios::binary);
        blob.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return fnv1a_hex(blob).substr(0, 12);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string data_dir_default() {
    const char* env = std::getenv("MUSERAG_DATA");
    if (env && *env) return env;
    return "data";
}

// Per-subcommand settings, wired up by the CLI11 option registrations below.
struct Args {
    // ingest
    std::string corpus_path;
    std::size_t min_section_tokens = 60;
    std::size_t chunk_size = 128;
    double overlap = 0.10;
    std::string tokenizer_name = "unicode";
    std::string out_path;

    // index / query / retrieval
    std::string passages_path;
    std::string index_path;
    std::string vectors_path;
    double k1 = 1.2;
    double b = 0.75;
    std::string backend_name = "bm25";
    std::size_t budget = 1024;
    std::optional<std::size_t> explicit_k;
    std::string query_text;
    std::string embedding_spec = "hash";
    std::string queries_path;

    // eval / ablate
    std::string benchmark_path;
    std::string mode_name = "zero-shot";
    std::string generator_spec = "mock";
    bool no_timing = false;
    bool include_options = false;
    std::string grid_path;

    // bench build
    std::string artists_path;
    std::size_t artist_count = 500;
    std::string review_queue_path;
    std::string data_dir = data_dir_default();
    std::string genre_mapping_path;
    std::string genre_freq_path;
    std::string countries_path;
    std::string prompts_dir;
    std::size_t top_genres = 300;
    double seen_fraction = -1.0;

    // export-finetune
    std::string style_name = "qa";
    std::string manifest_path;
};

RetrievalConfig make_retrieval_config(const Args& args) {
    auto backend = parse_backend(args.backend_name);
    if (!backend) throw ConfigError("unknown backend \"" + args.backend_name + "\"");
    RetrievalConfig config;
    config.backend = *backend;
    config.budget = {args.budget, args.chunk_size};
    config.explicit_k = args.explicit_k;
    return config;
}

// Owns whatever the chosen backend needs and hands out a borrowed handle.
struct LoadedIndex {
    PassageStore passages;
    InvertedIndex sparse;
    VectorStore dense;
    std::unique_ptr<Embedder> embedder;

    IndexHandle handle(RetrievalBackend backend) {
        IndexHandle h;
        h.passages = &passages;
        if (backend == RetrievalBackend::sparse_bm25) {
            h.sparse = &sparse;
        } else {
            h.dense = &dense;
            h.embedder = embedder.get();
        }
        return h;
    }
};

LoadedIndex load_backend(const Args& args, const ProfilesConfig& profiles) {
    LoadedIndex loaded;
    if (args.passages_path.empty()) throw ConfigError("--passages is required");
    loaded.passages = PassageStore::load(args.passages_path);
    auto backend = parse_backend(args.backend_name);
    if (!backend) throw ConfigError("unknown backend \"" + args.backend_name + "\"");
    if (*backend == RetrievalBackend::sparse_bm25) {
        if (args.index_path.empty()) throw ConfigError("--index is required for bm25");
        loaded.sparse = InvertedIndex::load(args.index_path, loaded.passages.meta().tokenizer);
    } else {
        if (args.vectors_path.empty()) throw ConfigError("--vectors is required for dense");
        loaded.dense = VectorStore::load(args.vectors_path);
        loaded.embedder = make_embedder(profiles, args.embedding_spec);
    }
    return loaded;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_ingest(const Args& args) {
    TokenizerSpec tokenizer = TokenizerSpec::from_name(args.tokenizer_name);
    ChunkingConfig chunking{args.chunk_size, args.overlap};

    auto documents = ingest_documents(args.corpus_path, tokenizer);
    std::vector<Passage> passages;
    for (Document& doc : documents) {
        Document kept = filter_sections(std::move(doc), args.min_section_tokens);
        auto chunks = chunk_document(kept, tokenizer, chunking);
        passages.insert(passages.end(), std::make_move_iterator(chunks.begin()),
                        std::make_move_iterator(chunks.end()));
    }

    PassageStoreMeta meta{tokenizer, args.chunk_size, args.overlap, args.min_section_tokens};
    PassageStore store(meta, std::move(passages));
    store.save(args.out_path);

    CorpusStats stats = corpus_stats(store.passages(), tokenizer);
    std::cout << "documents: " << documents.size() << "\npages with passages: " << stats.page_count
              << "\npassages: " << stats.passage_count << "\ntotal tokens: " << stats.total_tokens
              << "\nvocab size: " << stats.vocab_size << '\n';
    return 0;
}

int run_index_build(const Args& args) {
    PassageStore store = PassageStore::load(args.passages_path);
    InvertedIndex index =
        InvertedIndex::build(store.passages(), store.meta().tokenizer, {args.k1, args.b});
    index.save(args.out_path);
    std::cout << "indexed " << index.passage_count() << " passages, vocab " << index.vocab_size()
              << ", avgdl " << index.avgdl() << '\n';
    return 0;
}

int run_index_stats(const Args& args) {
    InvertedIndex index = InvertedIndex::load(args.index_path);
    std::cout << "passages: " << index.passage_count() << "\navgdl: " << index.avgdl()
              << "\nvocab size: " << index.vocab_size() << "\nk1: " << index.params().k1
              << "\nb: " << index.params().b
              << "\ntokenizer: " << index.tokenizer().fingerprint() << '\n';
    return 0;
}

int run_stats(const Args& args) {
    PassageStore store = PassageStore::load(args.passages_path);
    CorpusStats stats = corpus_stats(store.passages(), store.meta().tokenizer);
    std::cout << "pages: " << stats.page_count << "\npassages: " << stats.passage_count
              << "\ntotal tokens: " << stats.total_tokens << "\nvocab size: " << stats.vocab_size
              << '\n';
    return 0;
}

int run_embed(const Args& args, const ProfilesConfig& profiles) {
    PassageStore store = PassageStore::load(args.passages_path);
    if (store.size() == 0) throw InputError("passage store is empty");
    auto embedder = make_embedder(profiles, args.embedding_spec);

    std::vector<std::string> texts;
    texts.reserve(store.size());
    for (const Passage& p : store.passages()) texts.push_back(p.text);
    auto vectors = embedder->embed(texts);

    VectorStore dense(vectors.at(0).dim(), embedder->backend_label());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        dense.add(store.passages()[i].passage_id, std::move(vectors[i]));
    }
    dense.canonicalize();
    dense.save(args.out_path);
    std::cout << "embedded " << dense.size() << " passages at dim " << dense.dim() << '\n';
    return 0;
}

int run_query(const Args& args, const ProfilesConfig& profiles) {
    LoadedIndex loaded = load_backend(args, profiles);
    RetrievalConfig config = make_retrieval_config(args);
    RetrievedContext context = retrieve(args.query_text, config, loaded.handle(config.backend));

    std::cout << "query: " << context.query << "\nhits: " << context.items.size()
              << "  total tokens: " << context.total_tokens << '\n';
    for (std::size_t i = 0; i < context.items.size(); ++i) {
        const ScoredPassage& item = context.items[i];
        std::string snippet = item.passage.text.substr(0, 96);
        if (item.passage.text.size() > 96) snippet += "...";
        std::printf("%2zu. %-32s %10.4f  %s\n", i + 1, item.passage.passage_id.c_str(), item.score,
                    snippet.c_str());
    }
    return 0;
}

int run_bench_latency(const Args& args, const ProfilesConfig& profiles) {
    LoadedIndex loaded = load_backend(args, profiles);
    RetrievalConfig config = make_retrieval_config(args);

    std::vector<std::string> queries;
    for (std::string& line : read_lines(args.queries_path)) {
        if (!line.empty()) queries.push_back(std::move(line));
    }
    LatencyReport report =
        measure_retrieval_latency(queries, config, loaded.handle(config.backend));
    std::printf("queries: %zu\nmean: %.3f ms\np50: %.3f ms\np95: %.3f ms\nthroughput: %.1f q/s\n",
                report.query_count, report.mean_ms, report.p50_ms, report.p95_ms,
                report.queries_per_second);
    return 0;
}

int run_eval(const Args& args, const GlobalOptions& global, const ProfilesConfig& profiles) {
    auto mode = parse_eval_mode(args.mode_name);
    if (!mode) throw ConfigError("unknown eval mode \"" + args.mode_name + "\"");

    auto items = load_benchmark(args.benchmark_path);
    auto generator = make_generator(profiles, args.generator_spec);

    EvalOptions options;
    options.mode = *mode;
    options.workers = global.workers;
    options.include_options_in_query = args.include_options;

    LoadedIndex loaded;
    IndexHandle handle;
    if (*mode == EvalMode::rag) {
        options.retrieval = make_retrieval_config(args);
        loaded = load_backend(args, profiles);
        handle = loaded.handle(options.retrieval.backend);
    } else if (*mode == EvalMode::gold_context) {
        if (args.passages_path.empty()) throw ConfigError("--passages is required for gold mode");
        loaded.passages = PassageStore::load(args.passages_path);
        handle.passages = &loaded.passages;
    }

    EvalReport report = evaluate(items, options, *generator, handle);
    std::cout << render_report(report, items);
    if (report.partial) {
        std::cerr << "warning: partial run, " << report.generation_errors
                  << " item(s) hit generation errors\n";
    }
    if (!args.out_path.empty()) {
        write_text_file(args.out_path,
                        report_to_json(report, items, !args.no_timing).dump(2) + "\n");
    }
    return 0;
}

int run_ablate(const Args& args, const GlobalOptions& global, const ProfilesConfig& profiles) {
    AblationGrid grid = load_ablation_grid(args.grid_path);
    auto items = load_benchmark(args.benchmark_path);
    auto generator = make_generator(profiles, args.generator_spec);

    EvalOptions options;
    options.workers = global.workers;
    options.include_options_in_query = args.include_options;

    auto results = run_ablation(grid, items, *generator, options, [&](const AblationCell& cell) {
        return make_embedder(profiles, cell.embedding.empty() ? "hash" : cell.embedding);
    });
    std::cout << render_ablation(results, items);
    if (!args.out_path.empty()) {
        write_text_file(args.out_path,
                        ablation_to_json(results, items, grid.budget, !args.no_timing).dump(2) +
                            "\n");
    }
    return 0;
}

int run_bench_build(const Args& args, const GlobalOptions& global,
                    const ProfilesConfig& profiles) {
    PassageStore store = PassageStore::load(args.passages_path);
    auto artists = load_artist_meta(args.artists_path);

    std::string mapping_path = args.genre_mapping_path.empty()
                                   ? args.data_dir + "/genre_mapping.tsv"
                                   : args.genre_mapping_path;
    std::string countries_path =
        args.countries_path.empty() ? args.data_dir + "/countries.txt" : args.countries_path;
    std::string prompts_dir =
        args.prompts_dir.empty() ? args.data_dir + "/prompts" : args.prompts_dir;

    GenreMapping mapping = load_genre_mapping(mapping_path);
    GenreFrequency frequency;
    if (!args.genre_freq_path.empty()) {
        frequency = load_genre_frequency(args.genre_freq_path);
    } else {
        for (const ArtistRecord& artist : artists) {
            for (const std::string& raw : artist.raw_genres) ++frequency[normalize_genre(raw)];
        }
    }

    BenchgenOptions options;
    options.artist_count = args.artist_count;
    options.seed = global.seed;
    options.top_genres = args.top_genres;
    options.seen_fraction = args.seen_fraction;

    auto generator = make_generator(profiles, args.generator_spec);
    BenchgenResult result = build_benchmark(
        store, artists, frequency, mapping, load_country_list(countries_path),
        BenchgenPrompts::load_dir(prompts_dir), *generator, options, args.review_queue_path);

    save_benchmark(result.items, args.out_path);
    std::cout << "items: " << result.items.size()
              << "\ncandidates generated: " << result.candidates_generated
              << "\nrejected at parse: " << result.candidates_rejected
              << "\nexcluded by validation: " << result.candidates_excluded
              << "\nrouted to review: " << result.candidates_needing_review << '\n';
    return 0;
}

int run_export_finetune(const Args& args) {
    auto style = parse_export_style(args.style_name);
    if (!style) throw ConfigError("unknown export style \"" + args.style_name + "\"");
    auto items = load_benchmark(args.benchmark_path);

    PromptTemplate tmpl = PromptTemplate::default_mcq();
    ExportManifest manifest;
    if (*style == ExportStyle::qa) {
        manifest = export_qa(items, tmpl, args.out_path);
    } else {
        if (args.passages_path.empty()) throw ConfigError("--passages is required for rag export");
        PassageStore store = PassageStore::load(args.passages_path);
        manifest = export_rag(items, store, tmpl, args.out_path);
    }

    json rendered = manifest_to_json(manifest);
    std::cout << rendered.dump(2) << '\n';
    if (!args.manifest_path.empty()) {
        write_text_file(args.manifest_path, rendered.dump(2) + "\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"muserag: passage retrieval and MCQA evaluation toolkit"};
    app.require_subcommand(1);

    GlobalOptions global;
    Args args;
    app.add_option("--config", global.config_path,
                   "profiles config file (or MUSERAG_CONFIG env var)");
    app.add_option("--seed", global.seed, "seed for all randomized steps");
    app.add_option("--workers", global.workers, "worker pool size for evaluation");

    auto* ingest = app.add_subcommand("ingest", "chunk a document corpus into passages");
    ingest->add_option("--corpus", args.corpus_path, "document file, one JSON record per line")
        ->required();
    ingest->add_option("--min-section-tokens", args.min_section_tokens, "section filter floor");
    ingest->add_option("--chunk-size", args.chunk_size, "max tokens per passage");
    ingest->add_option("--overlap", args.overlap, "overlap ratio between adjacent passages");
    ingest->add_option("--tokenizer", args.tokenizer_name, "unicode|whitespace");
    ingest->add_option("--out", args.out_path, "output passage file")->required();

    auto* index = app.add_subcommand("index", "inverted index operations");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "build a BM25 index from passages");
    index_build->add_option("--passages", args.passages_path, "passage file")->required();
    index_build->add_option("--out", args.out_path, "output index file")->required();
    index_build->add_option("--k1", args.k1, "BM25 k1");
    index_build->add_option("--b", args.b, "BM25 b");
    auto* index_stats = index->add_subcommand("stats", "print index statistics");
    index_stats->add_option("--index", args.index_path, "index file")->required();

    auto* stats = app.add_subcommand("stats", "print corpus statistics for a passage file");
    stats->add_option("--passages", args.passages_path, "passage file")->required();

    auto* embed = app.add_subcommand("embed", "embed passages into a vector file");
    embed->add_option("--passages", args.passages_path, "passage file")->required();
    embed->add_option("--embedding", args.embedding_spec, "embedder spec or profile");
    embed->add_option("--out", args.out_path, "output vector file")->required();

    auto* query = app.add_subcommand("query", "run one retrieval query");
    query->add_option("--index", args.index_path, "BM25 index file");
    query->add_option("--vectors", args.vectors_path, "vector file (dense backend)");
    query->add_option("--passages", args.passages_path, "passage file")->required();
    query->add_option("--backend", args.backend_name, "bm25|dense");
    query->add_option("--budget", args.budget, "total token budget");
    query->add_option("--chunk-size", args.chunk_size, "chunk size the index was built at");
    query->add_option("--k", args.explicit_k, "explicit top-k override");
    query->add_option("--embedding", args.embedding_spec, "embedder spec (dense backend)");
    query->add_option("--q", args.query_text, "query text")->required();

    auto* bench_latency = app.add_subcommand("bench-latency", "time retrieval over a query file");
    bench_latency->add_option("--index", args.index_path, "BM25 index file");
    bench_latency->add_option("--vectors", args.vectors_path, "vector file (dense backend)");
    bench_latency->add_option("--passages", args.passages_path, "passage file")->required();
    bench_latency->add_option("--backend", args.backend_name, "bm25|dense");
    bench_latency->add_option("--budget", args.budget, "total token budget");
    bench_latency->add_option("--chunk-size", args.chunk_size, "chunk size");
    bench_latency->add_option("--embedding", args.embedding_spec, "embedder spec (dense)");
    bench_latency->add_option("--queries", args.queries_path, "query file, one per line")
        ->required();

    auto* eval = app.add_subcommand("eval", "run an MCQA evaluation");
    eval->add_option("--benchmark", args.benchmark_path, "benchmark file")->required();
    eval->add_option("--mode", args.mode_name, "zero-shot|rag|gold");
    eval->add_option("--index", args.index_path, "BM25 index file (rag)");
    eval->add_option("--vectors", args.vectors_path, "vector file (rag, dense)");
    eval->add_option("--passages", args.passages_path, "passage file (rag/gold)");
    eval->add_option("--backend", args.backend_name, "bm25|dense");
    eval->add_option("--budget", args.budget, "total token budget");
    eval->add_option("--chunk-size", args.chunk_size, "chunk size");
    eval->add_option("--k", args.explicit_k, "explicit top-k override");
    eval->add_option("--embedding", args.embedding_spec, "embedder spec (dense)");
    eval->add_option("--generator", args.generator_spec, "generator spec or profile");
    eval->add_option("--out", args.out_path, "machine-readable report file");
    eval->add_flag("--no-timing", args.no_timing, "omit wall-clock latency from the report");
    eval->add_flag("--include-options", args.include_options,
                   "append option texts to the retrieval query");

    auto* ablate = app.add_subcommand("ablate", "run the retriever ablation grid");
    ablate->add_option("--grid", args.grid_path, "grid spec file")->required();
    ablate->add_option("--benchmark", args.benchmark_path, "benchmark file")->required();
    ablate->add_option("--generator", args.generator_spec, "generator spec or profile");
    ablate->add_option("--out", args.out_path, "matrix output file");
    ablate->add_flag("--no-timing", args.no_timing, "omit wall-clock latency from the report");
    ablate->add_flag("--include-options", args.include_options,
                     "append option texts to the retrieval query");

    auto* bench = app.add_subcommand("bench", "benchmark construction");
    bench->require_subcommand(1);
    auto* bench_build = bench->add_subcommand("build", "build a benchmark from a passage corpus");
    bench_build->add_option("--corpus", args.passages_path, "passage file")->required();
    bench_build->add_option("--artists", args.artists_path, "artist metadata file")->required();
    bench_build->add_option("--n", args.artist_count, "number of artists to select");
    bench_build->add_option("--generator", args.generator_spec, "generator spec or profile");
    bench_build->add_option("--out", args.out_path, "benchmark output file")->required();
    bench_build->add_option("--review-queue", args.review_queue_path, "review queue output file")
        ->required();
    bench_build->add_option("--data-dir", args.data_dir, "directory with bundled data files");
    bench_build->add_option("--genre-mapping", args.genre_mapping_path, "genre mapping table");
    bench_build->add_option("--genre-freq", args.genre_freq_path,
                            "genre frequency table (default: counted from --artists)");
    bench_build->add_option("--countries", args.countries_path, "country name list");
    bench_build->add_option("--prompts", args.prompts_dir, "prompt template directory");
    bench_build->add_option("--top-genres", args.top_genres, "frequency cutoff rank");
    bench_build->add_option("--seen-fraction", args.seen_fraction,
                            "fraction of artists marked seen (unset: no seen flags)");

    auto* export_ft = app.add_subcommand("export-finetune", "emit supervised training records");
    export_ft->add_option("--benchmark", args.benchmark_path, "benchmark file")->required();
    export_ft->add_option("--style", args.style_name, "qa|rag");
    export_ft->add_option("--passages", args.passages_path, "passage file (rag style)");
    export_ft->add_option("--out", args.out_path, "output records file")->required();
    export_ft->add_option("--manifest", args.manifest_path, "manifest output file");

    // Global options (--seed, --config, --workers) may follow the subcommand.
    for (CLI::App* sub : app.get_subcommands(nullptr)) {
        sub->fallthrough();
        for (CLI::App* nested : sub->get_subcommands(nullptr)) nested->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::cerr << "muserag " << kVersion << " | config " << config_hash(argc, argv, global)
              << " | seed " << global.seed << '\n';

    try {
        ProfilesConfig profiles = load_config(global);
        if (ingest->parsed()) return run_ingest(args);
        if (index_build->parsed()) return run_index_build(args);
        if (index_stats->parsed()) return run_index_stats(args);
        if (stats->parsed()) return run_stats(args);
        if (embed->parsed()) return run_embed(args, profiles);
        if (query->parsed()) return run_query(args, profiles);
        if (bench_latency->parsed()) return run_bench_latency(args, profiles);
        if (eval->parsed()) return run_eval(args, global, profiles);
        if (ablate->parsed()) return run_ablate(args, global, profiles);
        if (bench_build->parsed()) return run_bench_build(args, global, profiles);
        if (export_ft->parsed()) return run_export_finetune(args);
        std::cerr << "E_USAGE: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << e.code() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "E_INTERNAL: " << e.what() << '\n';
        return 1;
    }
}
