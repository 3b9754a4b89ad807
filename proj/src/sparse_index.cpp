#include "muserag/sparse_index.hpp"

#include "muserag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace muserag {

namespace {

constexpr const char* kIndexMagic = "MRIDX1";

double term_score(double idf, double tf, double len, double avgdl, const Bm25Params& p) {
    double norm = p.k1 * (1.0 - p.b + p.b * len / avgdl);
    return idf * tf * (p.k1 + 1.0) / (tf + norm);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) throw FormatError("truncated index file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("truncated index file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

std::string read_string(std::istream& in) {
    std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) throw FormatError("truncated index file");
    return s;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

InvertedIndex InvertedIndex::build(const std::vector<Passage>& passages,
                                   const TokenizerSpec& tokenizer, const Bm25Params& params) {
    if (passages.empty()) throw ConfigError("cannot build an index from an empty passage list");
    if (params.k1 < 0.0) throw ConfigError("k1 must be >= 0");
    if (params.b < 0.0 || params.b > 1.0) throw ConfigError("b must be in [0, 1]");

    // Canonical passage order: sorted by passage_id, independent of input order.
    std::vector<std::size_t> order(passages.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return passages[a].passage_id < passages[b].passage_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (passages[order[i - 1]].passage_id == passages[order[i]].passage_id) {
            throw IntegrityError("duplicate passage_id: " + passages[order[i]].passage_id);
        }
    }

    InvertedIndex ix;
    ix.params_ = params;
    ix.tokenizer_ = tokenizer;
    ix.passage_ids_.reserve(passages.size());
    ix.lengths_.reserve(passages.size());

    std::uint64_t total_len = 0;
    std::unordered_map<std::string, std::uint32_t> tf;
    for (std::size_t ord = 0; ord < order.size(); ++ord) {
        const Passage& p = passages[order[ord]];
        ix.passage_ids_.push_back(p.passage_id);

        tf.clear();
        for (const std::string& token : tokenize(tokenizer, p.text)) {
            ++tf[index_term(token)];
        }
        std::uint32_t len = 0;
        for (const auto& [term, count] : tf) len += count;
        ix.lengths_.push_back(len);
        total_len += len;
        for (const auto& [term, count] : tf) {
            ix.postings_[term].push_back({static_cast<std::uint32_t>(ord), count});
        }
    }
    ix.avgdl_ = static_cast<double>(total_len) / static_cast<double>(passages.size());
    return ix;
}

std::size_t InvertedIndex::passage_length(std::uint32_t ord) const {
    if (ord >= lengths_.size()) throw LookupError("unknown passage_ord " + std::to_string(ord));
    return lengths_[ord];
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

std::size_t InvertedIndex::document_frequency(const std::string& term) const {
    const auto* list = postings(term);
    return list ? list->size() : 0;
}

double InvertedIndex::idf(const std::string& term) const {
    double n = static_cast<double>(passage_count());
    double df = static_cast<double>(document_frequency(term));
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double InvertedIndex::bm25_score(const std::vector<std::string>& query_terms,
                                 std::uint32_t passage_ord) const {
    if (passage_ord >= lengths_.size()) {
        throw LookupError("unknown passage_ord " + std::to_string(passage_ord));
    }
    double len = static_cast<double>(lengths_[passage_ord]);
    double score = 0.0;
    for (const std::string& term : query_terms) {
        const auto* list = postings(term);
        if (!list) continue;
        auto it = std::lower_bound(list->begin(), list->end(), passage_ord,
                                   [](const Posting& p, std::uint32_t ord) {
                                       return p.passage_ord < ord;
                    });
        if (it == list->end() || it->passage_ord != passage_ord) continue;
        score += term_score(idf(term), static_cast<double>(it->term_frequency), len, avgdl_,
                            params_);
    }
    return score;
}

std::vector<SearchHit> InvertedIndex::search(const std::string& query, std::size_t k) const {
    if (k < 1) throw InputError("k must be >= 1");
    std::vector<double> scores(passage_count(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<bool> seen(passage_count(), false);

    for (const std::string& term : query_terms(tokenizer_, query)) {
        const auto* list = postings(term);
        if (!list) continue;
        double term_idf = idf(term);
        for (const Posting& posting : *list) {
            double len = static_cast<double>(lengths_[posting.passage_ord]);
            scores[posting.passage_ord] += term_score(
                term_idf, static_cast<double>(posting.term_frequency), len, avgdl_, params_);
            if (!seen[posting.passage_ord]) {
                seen[posting.passage_ord] = true;
                touched.push_back(posting.passage_ord);
            }
        }
    }

    std::vector<SearchHit> hits;
    hits.reserve(touched.size());
    for (std::uint32_t ord : touched) {
        if (scores[ord] > 0.0) hits.push_back({ord, scores[ord]});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_ord < b.passage_ord;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

void InvertedIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write index file: " + path);

    out << kIndexMagic << '\n';
    out << "k1=" << format_double(params_.k1) << " b=" << format_double(params_.b)
        << " tokenizer=" << tokenizer_.fingerprint() << '\n';

    write_u64(out, passage_count());
    for (std::size_t i = 0; i < passage_ids_.size(); ++i) {
        write_string(out, passage_ids_[i]);
        write_u32(out, lengths_[i]);
    }
    write_u64(out, postings_.size());
    for (const auto& [term, list] : postings_) {
        write_string(out, term);
        write_u64(out, list.size());
        for (const Posting& p : list) {
            write_u32(out, p.passage_ord);
            write_u32(out, p.term_frequency);
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path,
                                  std::optional<TokenizerSpec> expected_tokenizer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index file: " + path);

    std::string magic;
    if (!std::getline(in, magic) || magic != kIndexMagic) {
        throw FormatError("not a muserag index (bad magic): " + path);
    }
    std::string header;
    if (!std::getline(in, header)) throw FormatError("truncated index file");

    InvertedIndex ix;
    {
        double k1 = 0.0, b = 0.0;
        char fp[64] = {0};
        if (std::sscanf(header.c_str(), "k1=%lf b=%lf tokenizer=%63s", &k1, &b, fp) != 3) {
            throw FormatError("bad index header: " + header);
        }
        ix.params_ = {k1, b};
        ix.tokenizer_ = TokenizerSpec::from_fingerprint(fp);
    }
    if (expected_tokenizer && !(ix.tokenizer_ == *expected_tokenizer)) {
        throw FormatError("tokenizer fingerprint mismatch: index has " +
                          ix.tokenizer_.fingerprint() + ", expected " +
                          expected_tokenizer->fingerprint());
    }

    std::uint64_t n = read_u64(in);
    ix.passage_ids_.reserve(n);
    ix.lengths_.reserve(n);
    std::uint64_t total_len = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        ix.passage_ids_.push_back(read_string(in));
        ix.lengths_.push_back(read_u32(in));
        total_len += ix.lengths_.back();
    }
    std::uint64_t vocab = read_u64(in);
    for (std::uint64_t t = 0; t < vocab; ++t) {
        std::string term = read_string(in);
        std::uint64_t count = read_u64(in);
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            Posting p;
            p.passage_ord = read_u32(in);
            p.term_frequency = read_u32(in);
            if (p.passage_ord >= n) throw FormatError("posting references unknown passage");
            list.push_back(p);
        }
        ix.postings_.emplace(std::move(term), std::move(list));
    }
    ix.avgdl_ = n > 0 ? static_cast<double>(total_len) / static_cast<double>(n) : 0.0;
    return ix;
}

} // namespace muserag
