#include "muserag/dense_index.hpp"

#include "muserag/errors.hpp"
#include "muserag/http_util.hpp"
#include "muserag/tokenizer.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

namespace muserag {

using json = nlohmann::json;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw InputError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double x = a.values[i];
        double y = b.values[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) throw InputError("cosine similarity of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void VectorStore::add(const std::string& passage_id, EmbeddingVector vec) {
    if (vec.dim() != dim_) {
        throw InputError("vector dim " + std::to_string(vec.dim()) + " does not match store dim " +
                         std::to_string(dim_));
    }
    passage_ids_.push_back(passage_id);
    data_.insert(data_.end(), vec.values.begin(), vec.values.end());
}

void VectorStore::canonicalize() {
    std::vector<std::size_t> order(passage_ids_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return passage_ids_[a] < passage_ids_[b]; });

    std::vector<std::string> ids;
    std::vector<float> data;
    ids.reserve(passage_ids_.size());
    data.reserve(data_.size());
    for (std::size_t i : order) {
        if (!ids.empty() && ids.back() == passage_ids_[i]) {
            throw IntegrityError("duplicate passage_id in vector store: " + passage_ids_[i]);
        }
        ids.push_back(std::move(passage_ids_[i]));
        data.insert(data.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
                    data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_));
    }
    passage_ids_ = std::move(ids);
    data_ = std::move(data);
}

EmbeddingVector VectorStore::vector(std::uint32_t ord) const {
    if (ord >= size()) throw LookupError("unknown passage_ord " + std::to_string(ord));
    EmbeddingVector v;
    v.values.assign(data_.begin() + static_cast<std::ptrdiff_t>(ord * dim_),
                    data_.begin() + static_cast<std::ptrdiff_t>((ord + 1) * dim_));
    return v;
}

std::vector<SearchHit> VectorStore::search(const EmbeddingVector& query, std::size_t k) const {
    if (query.dim() != dim_) {
        throw InputError("query dim " + std::to_string(query.dim()) +
                         " does not match store dim " + std::to_string(dim_));
    }
    double qnorm = 0.0;
    for (float v : query.values) qnorm += static_cast<double>(v) * v;
    if (qnorm == 0.0) throw InputError("cosine similarity of a zero vector");
    qnorm = std::sqrt(qnorm);

    std::vector<SearchHit> hits;
    hits.reserve(size());
    for (std::size_t ord = 0; ord < size(); ++ord) {
        const float* row = data_.data() + ord * dim_;
        double dot = 0.0, rnorm = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            double x = row[i];
            dot += x * static_cast<double>(query.values[i]);
            rnorm += x * x;
        }
        double sim = rnorm == 0.0 ? 0.0 : dot / (std::sqrt(rnorm) * qnorm);
        hits.push_back({static_cast<std::uint32_t>(ord), sim});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_ord < b.passage_ord;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

// ---------------------------------------------------------------------------
// Persistence: text header, then ids and float32 rows, little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kVecMagic = "MRVEC1";

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) throw FormatError("truncated vector file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

void write_f32(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(out, bits);
}

float read_f32(std::istream& in) {
    std::uint32_t bits = read_u32(in);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

} // namespace

void VectorStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vector file: " + path);
    out << kVecMagic << '\n';
    out << "dim=" << dim_ << " count=" << size() << " backend=" << backend_ << '\n';
    for (const std::string& id : passage_ids_) {
        write_u32(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    for (float f : data_) write_f32(out, f);
    if (!out) throw IoError("write failed: " + path);
}

VectorStore VectorStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vector file: " + path);
    std::string magic;
    if (!std::getline(in, magic) || magic != kVecMagic) {
        throw FormatError("not a muserag vector file (bad magic): " + path);
    }
    std::string header;
    if (!std::getline(in, header)) throw FormatError("truncated vector file");
    std::size_t dim = 0, count = 0;
    char backend[128] = {0};
    if (std::sscanf(header.c_str(), "dim=%zu count=%zu backend=%127s", &dim, &count, backend) < 2) {
        throw FormatError("bad vector file header: " + header);
    }

    VectorStore store(dim, backend);
    store.passage_ids_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t len = read_u32(in);
        std::string id(len, '\0');
        if (len > 0 && !in.read(id.data(), len)) throw FormatError("truncated vector file");
        store.passage_ids_.push_back(std::move(id));
    }
    store.data_.reserve(count * dim);
    for (std::size_t i = 0; i < count * dim; ++i) store.data_.push_back(read_f32(in));
    return store;
}

// ---------------------------------------------------------------------------
// Embedding service client
// ---------------------------------------------------------------------------

namespace {

std::vector<EmbeddingVector> embed_batch(const EmbeddingClientConfig& config,
                                         const std::vector<std::string>& texts) {
    SplitUrl url = split_url(config.endpoint);
    json payload = {{"model", config.model}, {"input", texts}};

    std::string body;
    int attempt = 0;
    for (;;) {
        httplib::Client client(url.host_port);
        client.set_connection_timeout(config.timeout_ms / 1000,
                                      (config.timeout_ms % 1000) * 1000);
        client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!config.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config.api_key);
        }
        auto res = client.Post(url.path, headers, payload.dump(), "application/json");
        if (res && res->status == 200) {
            body = res->body;
            break;
        }
        bool transport_failure = !res || res->status >= 500;
        if (!transport_failure) {
            throw UnavailableError("embedding service rejected request (status " +
                                   std::to_string(res->status) + ")");
        }
        if (attempt >= config.max_retries) {
            throw UnavailableError("embedding service unreachable after " +
                                   std::to_string(attempt + 1) + " attempts: " + config.endpoint);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(config.backoff_ms << attempt));
        ++attempt;
    }

    json response;
    try {
        response = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!response.contains("vectors") || !response["vectors"].is_array()) {
        throw ProtocolError("embedding response is missing \"vectors\"");
    }
    const json& rows = response["vectors"];
    if (rows.size() != texts.size()) {
        throw ProtocolError("embedding service returned " + std::to_string(rows.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(rows.size());
    std::size_t dim = 0;
    for (const json& row : rows) {
        if (!row.is_array()) throw ProtocolError("embedding vector is not an array");
        EmbeddingVector v;
        v.values.reserve(row.size());
        for (const json& x : row) v.values.push_back(x.get<float>());
        if (v.dim() == 0) throw ProtocolError("embedding service returned an empty vector");
        if (out.empty()) {
            dim = v.dim();
        } else if (v.dim() != dim) {
            throw ProtocolError("inconsistent embedding dimensions in response");
        }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace

std::vector<EmbeddingVector> embed_texts(const EmbeddingClientConfig& config,
                                         const std::vector<std::string>& texts) {
    if (texts.empty()) throw InputError("embed_texts requires at least one text");
    if (config.max_batch < 1) throw ConfigError("max_batch must be >= 1");

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += config.max_batch) {
        std::size_t end = std::min(start + config.max_batch, texts.size());
        std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        auto vectors = embed_batch(config, batch);
        if (!out.empty() && !vectors.empty() && vectors[0].dim() != out[0].dim()) {
            throw ProtocolError("inconsistent embedding dimensions across batches");
        }
        out.insert(out.end(), std::make_move_iterator(vectors.begin()),
                   std::make_move_iterator(vectors.end()));
    }
    return out;
}

std::vector<EmbeddingVector> HashEmbedder::embed(const std::vector<std::string>& texts) {
    if (dim_ == 0) throw ConfigError("hash embedder dim must be >= 1");
    TokenizerSpec tok{TokenizerKind::unicode_word};
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        EmbeddingVector v;
        v.values.assign(dim_, 0.0f);
        for (const std::string& token : tokenize(tok, text)) {
            std::string term = index_term(token);
            std::uint64_t h = 1469598103934665603ULL; // FNV-1a
            for (unsigned char c : term) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            float sign = ((h >> 32) & 1) ? 1.0f : -1.0f;
            v.values[h % dim_] += sign;
        }
        double norm = 0.0;
        for (float x : v.values) norm += static_cast<double>(x) * x;
        if (norm == 0.0) {
            v.values[0] = 1.0f; // empty/unseen text still gets a usable direction
        } else {
            float inv = static_cast<float>(1.0 / std::sqrt(norm));
            for (float& x : v.values) x *= inv;
        }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace muserag
