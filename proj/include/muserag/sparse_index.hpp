#pragma once

#include "muserag/corpus.hpp"
#include "muserag/tokenizer.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace muserag {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t passage_ord = 0;
    std::uint32_t term_frequency = 0;
};

struct SearchHit {
    std::uint32_t passage_ord = 0;
    double score = 0.0;
};

// Okapi BM25 inverted index. Build canonicalizes passage order by passage_id,
// so the persisted form is byte-identical regardless of input order. Immutable
// after build; concurrent reads are safe.
class InvertedIndex {
public:
    InvertedIndex() = default;

    static InvertedIndex build(const std::vector<Passage>& passages,
                               const TokenizerSpec& tokenizer, const Bm25Params& params = {});

    std::size_t passage_count() const { return lengths_.size(); }
    double avgdl() const { return avgdl_; }
    std::size_t vocab_size() const { return postings_.size(); }
    const Bm25Params& params() const { return params_; }
    const TokenizerSpec& tokenizer() const { return tokenizer_; }
    const std::vector<std::string>& passage_ids() const { return passage_ids_; }
    std::size_t passage_length(std::uint32_t ord) const;

    // Posting list for a term, or nullptr if the term is unknown.
    const std::vector<Posting>* postings(const std::string& term) const;
    std::size_t document_frequency(const std::string& term) const;

    // IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1); always >= 0.
    double idf(const std::string& term) const;

    double bm25_score(const std::vector<std::string>& query_terms,
                      std::uint32_t passage_ord) const;

    // Ranked by score descending, ties by passage_ord ascending. Only passages
    // with a positive score are returned; exhaustive over posting lists.
    std::vector<SearchHit> search(const std::string& query, std::size_t k) const;

    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path,
                              std::optional<TokenizerSpec> expected_tokenizer = std::nullopt);

private:
    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> lengths_;
    std::vector<std::string> passage_ids_;
    double avgdl_ = 0.0;
    Bm25Params params_;
    TokenizerSpec tokenizer_;
};

} // namespace muserag
