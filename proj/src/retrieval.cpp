#include "l2r/retrieval.hpp"

#include "http_util.hpp"
#include "l2r/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

namespace l2r {

namespace {

struct SplitMix64 {
    std::uint64_t state;

    std::uint64_t next() noexcept {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower_ascii(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

constexpr char kSidecarMagic[5] = {'L', '2', 'R', 'V', '1'};

template <typename T>
void put_le(std::string& out, T value) {
    auto bits = std::bit_cast<std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
    using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<Bits>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<T>(bits);
}

}  // namespace

Vector Embedder::embed(std::string_view text) {
    ++calls_;
    auto v = do_embed(text);
    if (v.size() != dimension()) {
        throw DimensionMismatch("embedder returned " + std::to_string(v.size()) + " components, expected " +
                                std::to_string(dimension()));
    }
    return v;
}

std::string HashEmbedder::id() const { return "hash-fnv1a-splitmix64-d" + std::to_string(dimension_); }

Vector HashEmbedder::do_embed(std::string_view text) {
    Vector sum(dimension_, 0.0);
    std::size_t i = 0;
    std::string token;
    while (i < text.size()) {
        if (!is_token_char(text[i])) {
            ++i;
            continue;
        }
        token.clear();
        while (i < text.size() && is_token_char(text[i])) token.push_back(lower_ascii(text[i++]));
        SplitMix64 rng{fnv1a64(token)};
        for (auto& component : sum) {
            auto v = rng.next();
            component += static_cast<double>(v >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        }
    }
    l2_normalize(sum);
    return sum;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config) : config_(std::move(config)) {
    if (config_.dimension == 0) throw ConfigError("remote embedder needs a dimension");
}

std::string RemoteEmbedder::id() const {
    return "remote:" + config_.model + ":d" + std::to_string(config_.dimension);
}

Vector RemoteEmbedder::do_embed(std::string_view text) {
    if (trim(text).empty()) return Vector(config_.dimension, 0.0);
    std::string key;
    try {
        key = detail::require_api_key(config_.api_key_env);
    } catch (const AuthError& e) {
        throw ProviderError(e.what());
    }
    auto url = detail::split_url(config_.endpoint);
    auto client = detail::make_client(url.origin, config_.timeout_ms);
    client->set_bearer_token_auth(key);
    nlohmann::json body = {{"model", config_.model}, {"input", std::string(text)}};
    auto res = client->Post(url.path + "/embeddings", body.dump(), "application/json");
    if (!res) throw ProviderError("embedding endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status / 100 != 2) {
        throw ProviderError("embedding endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    Vector v;
    try {
        auto reply = nlohmann::json::parse(res->body);
        v = reply.at("data").at(0).at("embedding").get<Vector>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed embedding response: ") + e.what());
    }
    if (v.size() != config_.dimension) {
        throw DimensionMismatch("remote embedder returned " + std::to_string(v.size()) + " components, expected " +
                                std::to_string(config_.dimension));
    }
    l2_normalize(v);
    return v;
}

void l2_normalize(std::span<double> v) noexcept {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    double norm = std::sqrt(sq);
    if (norm == 0.0) return;
    for (double& x : v) x /= norm;
}

double l2_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

std::uint64_t EmbeddingCache::key(std::string_view embedder_id, std::string_view text) noexcept {
    std::uint64_t h = fnv1a64(embedder_id);
    h ^= 0xFF;
    h *= kFnvPrime;
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

const Vector* EmbeddingCache::lookup(std::string_view embedder_id, std::string_view text) const {
    auto it = vectors_.find(key(embedder_id, text));
    return it == vectors_.end() ? nullptr : &it->second;
}

void EmbeddingCache::store(std::string_view embedder_id, std::string_view text, Vector vector) {
    vectors_[key(embedder_id, text)] = std::move(vector);
}

void EmbeddingCache::load_sidecar(const std::string& path, const KnowledgeBase& kb, std::string_view embedder_id,
                                  std::size_t dimension) {
    auto bytes = read_file(path);
    if (bytes.size() < 9 || !std::equal(std::begin(kSidecarMagic), std::end(kSidecarMagic), bytes.begin())) {
        throw CacheCorrupt("bad embedding cache magic in " + path);
    }
    auto dim = get_le<std::uint32_t>(bytes.data() + 5);
    if (dim != dimension) {
        throw CacheCorrupt("embedding cache dimension " + std::to_string(dim) + " != " + std::to_string(dimension));
    }
    const std::size_t record = 8 + 8 * static_cast<std::size_t>(dim);
    if ((bytes.size() - 9) % record != 0) throw CacheCorrupt("truncated embedding cache record in " + path);

    std::unordered_map<std::uint64_t, Vector> loaded;
    for (std::size_t off = 9; off < bytes.size(); off += record) {
        auto id = get_le<std::uint64_t>(bytes.data() + off);
        Vector v(dim);
        for (std::size_t j = 0; j < dim; ++j) v[j] = get_le<double>(bytes.data() + off + 8 + 8 * j);
        if (const auto* entry = kb.find(id)) loaded[key(embedder_id, entry->text)] = std::move(v);
    }
    for (auto& [k, v] : loaded) vectors_[k] = std::move(v);
}

bool EmbeddingCache::try_load_sidecar(const std::string& path, const KnowledgeBase& kb, std::string_view embedder_id,
                                      std::size_t dimension) noexcept {
    try {
        load_sidecar(path, kb, embedder_id, dimension);
        return true;
    } catch (...) {
        vectors_.clear();
        return false;
    }
}

bool RetrievalSet::contains(EntryId id) const noexcept {
    return std::any_of(hits.begin(), hits.end(), [id](const auto& h) { return h.entry_id == id; });
}

void VectorIndex::add(Item item, std::span<const double> vector) {
    if (vector.size() != dimension_) throw DimensionMismatch("index vector has wrong dimension");
    items_.push_back(std::move(item));
    data_.insert(data_.end(), vector.begin(), vector.end());
}

RetrievalSet VectorIndex::search(std::span<const double> query, std::size_t k, std::string query_text) const {
    if (k == 0) throw PreconditionError("k must be at least 1");
    if (query.size() != dimension_) throw DimensionMismatch("query vector has wrong dimension");

    struct Scored {
        double distance;
        EntryId id;
        std::size_t slot;
    };
    std::vector<Scored> scored;
    scored.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) scored.push_back({l2_distance(query, vector(i)), items_[i].id, i});

    auto n = std::min(k, scored.size());
    auto before = [](const Scored& a, const Scored& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), before);

    RetrievalSet out;
    out.k_requested = k;
    out.query_text = std::move(query_text);
    out.hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& item = items_[scored[i].slot];
        out.hits.push_back({item.id, item.confidence, scored[i].distance, item.text});
    }
    return out;
}

void VectorIndex::save_sidecar(const std::string& path) const {
    std::string out(std::begin(kSidecarMagic), std::end(kSidecarMagic));
    put_le(out, static_cast<std::uint32_t>(dimension_));
    for (std::size_t i = 0; i < items_.size(); ++i) {
        put_le(out, items_[i].id);
        for (double x : vector(i)) put_le(out, x);
    }
    write_file(path, out);
}

VectorIndex build_index(const KnowledgeBase& kb, Embedder& embedder, EmbeddingCache* cache) {
    const auto embedder_id = embedder.id();
    VectorIndex index(embedder_id, embedder.dimension());
    for (const auto& entry : kb.entries()) {
        if (entry.deleted() || !(entry.confidence > 0.0)) continue;
        const Vector* cached = cache ? cache->lookup(embedder_id, entry.text) : nullptr;
        if (cached != nullptr && cached->size() == embedder.dimension()) {
            index.add({entry.id, entry.confidence, entry.text}, *cached);
            continue;
        }
        auto v = embedder.embed(entry.text);
        index.add({entry.id, entry.confidence, entry.text}, v);
        if (cache) cache->store(embedder_id, entry.text, std::move(v));
    }
    return index;
}

RetrievalSet retrieve_top_k(const VectorIndex& index, Embedder& embedder, std::string_view query, std::size_t k) {
    if (k == 0) throw PreconditionError("k must be at least 1");
    if (index.empty()) {
        RetrievalSet empty;
        empty.k_requested = k;
        empty.query_text = std::string(query);
        return empty;
    }
    auto q = embedder.embed(query);
    return index.search(q, k, std::string(query));
}

}  // namespace l2r
