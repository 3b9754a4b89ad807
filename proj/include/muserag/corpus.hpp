#pragma once

#include "muserag/tokenizer.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace muserag {

enum class DocCategory {
    artists,
    genres,
    instruments,
    history,
    technology,
    theory,
    forms,
    other,
};

const char* to_string(DocCategory category);
std::optional<DocCategory> parse_category(std::string_view name);

struct Section {
    std::string heading;
    std::string text;
    std::size_t token_count = 0;
};

struct Document {
    std::string doc_id;
    std::string title;
    DocCategory category = DocCategory::other;
    std::string abstract;
    std::vector<Section> sections;
};

// Atomic retrieval unit: a token-bounded slice of one section, with enough
// provenance to rebuild the section and to render a context block.
struct Passage {
    std::string passage_id; // "<doc_id>#s<section>#c<chunk>"
    std::string doc_id;
    std::string doc_title;
    std::string section_heading;
    std::string text;
    std::size_t token_count = 0;
    std::size_t token_offset = 0;
};

std::string make_passage_id(const std::string& doc_id, std::size_t section_ordinal,
                            std::size_t chunk_ordinal);
// Recovers the doc_id prefix from a passage id produced by make_passage_id.
std::string doc_id_of_passage(const std::string& passage_id);

struct ChunkingConfig {
    std::size_t chunk_size = 128;
    double overlap_ratio = 0.10;

    std::size_t overlap_tokens() const; // floor(overlap_ratio * chunk_size)
    std::size_t stride() const;         // chunk_size - overlap; must be > 0
};

struct CorpusStats {
    std::size_t page_count = 0;
    std::size_t passage_count = 0;
    std::size_t total_tokens = 0;
    std::size_t vocab_size = 0;
};

// Reads a line-delimited document file. Throws ParseError with the offending
// line number, IntegrityError on duplicate doc_id.
std::vector<Document> ingest_documents(const std::string& path, const TokenizerSpec& tokenizer);

// Keeps exactly the sections with token_count >= min_tokens, order preserved.
Document filter_sections(Document doc, std::size_t min_tokens = 60);

struct SectionProvenance {
    std::string doc_id;
    std::string doc_title;
    std::string heading;
    std::size_t section_ordinal = 0;
};

std::vector<Passage> chunk_section(const Section& section, const SectionProvenance& origin,
                                   const TokenizerSpec& tokenizer, const ChunkingConfig& config);
std::vector<Passage> chunk_document(const Document& doc, const TokenizerSpec& tokenizer,
                                    const ChunkingConfig& config);

CorpusStats corpus_stats(const std::vector<Passage>& passages, const TokenizerSpec& tokenizer);

// Chunking parameters recorded alongside a persisted passage set so that
// downstream consumers can verify index/budget compatibility.
struct PassageStoreMeta {
    TokenizerSpec tokenizer;
    std::size_t chunk_size = 128;
    double overlap_ratio = 0.10;
    std::size_t min_section_tokens = 60;
};

class PassageStore {
public:
    PassageStore() = default;
    PassageStore(PassageStoreMeta meta, std::vector<Passage> passages);

    const PassageStoreMeta& meta() const { return meta_; }
    const std::vector<Passage>& passages() const { return passages_; }
    std::size_t size() const { return passages_.size(); }

    const Passage* find(std::string_view passage_id) const;

    void save(const std::string& path) const;
    static PassageStore load(const std::string& path,
                             std::optional<TokenizerSpec> expected_tokenizer = std::nullopt);

private:
    void rebuild_lookup();

    PassageStoreMeta meta_;
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

} // namespace muserag
