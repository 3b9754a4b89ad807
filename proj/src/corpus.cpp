#include "muserag/corpus.hpp"

#include "muserag/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace muserag {

using json = nlohmann::json;

const char* to_string(DocCategory category) {
    switch (category) {
        case DocCategory::artists: return "artists";
        case DocCategory::genres: return "genres";
        case DocCategory::instruments: return "instruments";
        case DocCategory::history: return "history";
        case DocCategory::technology: return "technology";
        case DocCategory::theory: return "theory";
        case DocCategory::forms: return "forms";
        case DocCategory::other: return "other";
    }
    return "other";
}

std::optional<DocCategory> parse_category(std::string_view name) {
    static const std::pair<std::string_view, DocCategory> table[] = {
        {"artists", DocCategory::artists},       {"genres", DocCategory::genres},
        {"instruments", DocCategory::instruments}, {"history", DocCategory::history},
        {"technology", DocCategory::technology}, {"theory", DocCategory::theory},
        {"forms", DocCategory::forms},           {"other", DocCategory::other},
    };
    for (const auto& [key, value] : table) {
        if (key == name) return value;
    }
    return std::nullopt;
}

std::string make_passage_id(const std::string& doc_id, std::size_t section_ordinal,
                            std::size_t chunk_ordinal) {
    return doc_id + "#s" + std::to_string(section_ordinal) + "#c" + std::to_string(chunk_ordinal);
}

std::string doc_id_of_passage(const std::string& passage_id) {
    std::size_t chunk_mark = passage_id.rfind("#c");
    if (chunk_mark == std::string::npos) return passage_id;
    std::size_t section_mark = passage_id.rfind("#s", chunk_mark);
    if (section_mark == std::string::npos) return passage_id;
    return passage_id.substr(0, section_mark);
}

std::size_t ChunkingConfig::overlap_tokens() const {
    return static_cast<std::size_t>(std::floor(overlap_ratio * static_cast<double>(chunk_size)));
}

std::size_t ChunkingConfig::stride() const {
    std::size_t overlap = overlap_tokens();
    return overlap >= chunk_size ? 0 : chunk_size - overlap;
}

std::vector<Document> ingest_documents(const std::string& path, const TokenizerSpec& tokenizer) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);

    std::vector<Document> docs;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!record.is_object()) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": expected an object");
        }

        Document doc;
        try {
            doc.doc_id = record.at("doc_id").get<std::string>();
            doc.title = record.at("title").get<std::string>();
            std::string category = record.at("category").get<std::string>();
            auto parsed = parse_category(category);
            if (!parsed) {
                throw ParseError("corpus line " + std::to_string(line_no) +
                                 ": unknown category \"" + category + "\"");
            }
            doc.category = *parsed;
            doc.abstract = record.value("abstract", std::string{});
            for (const json& sec : record.value("sections", json::array())) {
                Section section;
                section.heading = sec.value("heading", std::string{});
                section.text = sec.at("text").get<std::string>();
                section.token_count = count_tokens(tokenizer, section.text);
                doc.sections.push_back(std::move(section));
            }
        } catch (const ParseError&) {
            throw;
        } catch (const json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }

        if (!seen_ids.insert(doc.doc_id).second) {
            throw IntegrityError("duplicate doc_id \"" + doc.doc_id + "\" at line " +
                                 std::to_string(line_no));
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

Document filter_sections(Document doc, std::size_t min_tokens) {
    if (min_tokens < 1) throw InputError("min_tokens must be >= 1");
    std::erase_if(doc.sections,
                  [min_tokens](const Section& s) { return s.token_count < min_tokens; });
    return doc;
}

std::vector<Passage> chunk_section(const Section& section, const SectionProvenance& origin,
                                   const TokenizerSpec& tokenizer, const ChunkingConfig& config) {
    if (config.chunk_size < 2) throw ConfigError("chunk_size must be >= 2");
    if (config.overlap_ratio < 0.0 || config.overlap_ratio >= 1.0) {
        throw ConfigError("overlap_ratio must be in [0, 1)");
    }
    std::size_t stride = config.stride();
    if (stride == 0) {
        throw ConfigError("overlap leaves no stride (chunk_size " +
                          std::to_string(config.chunk_size) + ", overlap " +
                          std::to_string(config.overlap_tokens()) + ")");
    }

    std::vector<TokenSpan> spans = tokenize_spans(tokenizer, section.text);
    std::vector<Passage> passages;
    if (spans.empty()) return passages;

    std::size_t total = spans.size();
    std::size_t chunk_ordinal = 0;
    for (std::size_t start = 0;; start += stride) {
        std::size_t end = std::min(start + config.chunk_size, total);
        Passage p;
        p.passage_id = make_passage_id(origin.doc_id, origin.section_ordinal, chunk_ordinal);
        p.doc_id = origin.doc_id;
        p.doc_title = origin.doc_title;
        p.section_heading = origin.heading;
        p.text = section.text.substr(spans[start].begin, spans[end - 1].end - spans[start].begin);
        p.token_count = end - start;
        p.token_offset = start;
        passages.push_back(std::move(p));
        ++chunk_ordinal;
        if (end >= total) break;
    }
    return passages;
}

std::vector<Passage> chunk_document(const Document& doc, const TokenizerSpec& tokenizer,
                                    const ChunkingConfig& config) {
    std::vector<Passage> passages;
    for (std::size_t i = 0; i < doc.sections.size(); ++i) {
        SectionProvenance origin{doc.doc_id, doc.title, doc.sections[i].heading, i};
        auto chunks = chunk_section(doc.sections[i], origin, tokenizer, config);
        passages.insert(passages.end(), std::make_move_iterator(chunks.begin()),
                        std::make_move_iterator(chunks.end()));
    }
    return passages;
}

CorpusStats corpus_stats(const std::vector<Passage>& passages, const TokenizerSpec& tokenizer) {
    CorpusStats stats;
    std::unordered_set<std::string> docs;
    std::unordered_set<std::string> vocab;
    for (const Passage& p : passages) {
        docs.insert(p.doc_id);
        for (const std::string& token : tokenize(tokenizer, p.text)) {
            vocab.insert(index_term(token));
        }
        stats.total_tokens += p.token_count;
    }
    stats.page_count = docs.size();
    stats.passage_count = passages.size();
    stats.vocab_size = vocab.size();
    return stats;
}

// ---------------------------------------------------------------------------
// PassageStore persistence: one header line, then one passage per line.
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kStoreFormat = "muserag.passages.v1";
}

PassageStore::PassageStore(PassageStoreMeta meta, std::vector<Passage> passages)
    : meta_(std::move(meta)), passages_(std::move(passages)) {
    rebuild_lookup();
}

void PassageStore::rebuild_lookup() {
    by_id_.clear();
    by_id_.reserve(passages_.size());
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        if (!by_id_.emplace(passages_[i].passage_id, i).second) {
            throw IntegrityError("duplicate passage_id: " + passages_[i].passage_id);
        }
    }
}

const Passage* PassageStore::find(std::string_view passage_id) const {
    auto it = by_id_.find(std::string(passage_id));
    return it == by_id_.end() ? nullptr : &passages_[it->second];
}

void PassageStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write passage file: " + path);

    json header = {
        {"format", kStoreFormat},
        {"tokenizer", meta_.tokenizer.fingerprint()},
        {"chunk_size", meta_.chunk_size},
        {"overlap_ratio", meta_.overlap_ratio},
        {"min_section_tokens", meta_.min_section_tokens},
        {"passage_count", passages_.size()},
    };
    out << header.dump() << '\n';
    for (const Passage& p : passages_) {
        json record = {
            {"passage_id", p.passage_id},   {"doc_id", p.doc_id},
            {"doc_title", p.doc_title},     {"section_heading", p.section_heading},
            {"text", p.text},               {"token_count", p.token_count},
            {"token_offset", p.token_offset},
        };
        out << record.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

PassageStore PassageStore::load(const std::string& path,
                                std::optional<TokenizerSpec> expected_tokenizer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open passage file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty passage file: " + path);

    PassageStoreMeta meta;
    std::size_t declared_count = 0;
    try {
        json header = json::parse(line);
        if (header.value("format", std::string{}) != kStoreFormat) {
            throw FormatError("not a passage file (bad header): " + path);
        }
        meta.tokenizer = TokenizerSpec::from_fingerprint(header.at("tokenizer").get<std::string>());
        meta.chunk_size = header.at("chunk_size").get<std::size_t>();
        meta.overlap_ratio = header.at("overlap_ratio").get<double>();
        meta.min_section_tokens = header.at("min_section_tokens").get<std::size_t>();
        declared_count = header.at("passage_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError("bad passage file header: " + std::string(e.what()));
    }
    if (expected_tokenizer && !(meta.tokenizer == *expected_tokenizer)) {
        throw FormatError("tokenizer fingerprint mismatch: file has " +
                          meta.tokenizer.fingerprint() + ", expected " +
                          expected_tokenizer->fingerprint());
    }

    std::vector<Passage> passages;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json record = json::parse(line);
            Passage p;
            p.passage_id = record.at("passage_id").get<std::string>();
            p.doc_id = record.at("doc_id").get<std::string>();
            p.doc_title = record.value("doc_title", std::string{});
            p.section_heading = record.value("section_heading", std::string{});
            p.text = record.at("text").get<std::string>();
            p.token_count = record.at("token_count").get<std::size_t>();
            p.token_offset = record.at("token_offset").get<std::size_t>();
            passages.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw FormatError("passage file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (passages.size() != declared_count) {
        throw FormatError("passage file is truncated: header declares " +
                          std::to_string(declared_count) + " passages, found " +
                          std::to_string(passages.size()));
    }
    return PassageStore(std::move(meta), std::move(passages));
}

} // namespace muserag
