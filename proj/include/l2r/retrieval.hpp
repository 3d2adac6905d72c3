#pragma once

#include "l2r/knowledge_store.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace l2r {

inline constexpr std::size_t kDefaultTopK = 4;
inline constexpr std::size_t kHashEmbedderDimension = 64;

using Vector = std::vector<double>;

/// Text embedding provider. Every non-empty text maps to a unit vector; empty
/// text maps to the zero vector. `calls()` counts provider invocations.
class Embedder {
public:
    virtual ~Embedder() = default;

    Vector embed(std::string_view text);

    [[nodiscard]] virtual std::size_t dimension() const noexcept = 0;
    [[nodiscard]] virtual std::string id() const = 0;
    [[nodiscard]] std::uint64_t calls() const noexcept { return calls_.load(); }

protected:
    virtual Vector do_embed(std::string_view text) = 0;

private:
    std::atomic<std::uint64_t> calls_{0};
};

/// Deterministic bag-of-tokens embedder. Tokens are maximal runs of ASCII
/// letters/digits (letters lowercased). Each token seeds splitmix64 with its
/// FNV-1a 64 hash and draws `dimension` components (v >> 11) * 2^-53 * 2 - 1.
/// Token vectors are summed with multiplicity and L2-normalized.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = kHashEmbedderDimension) : dimension_(dimension) {}

    [[nodiscard]] std::size_t dimension() const noexcept override { return dimension_; }
    [[nodiscard]] std::string id() const override;

protected:
    Vector do_embed(std::string_view text) override;

private:
    std::size_t dimension_;
};

struct RemoteEmbedderConfig {
    std::string endpoint;  // base URL; POST {endpoint}/embeddings
    std::string model;
    std::size_t dimension = 0;
    std::string api_key_env = "L2R_API_KEY";
    unsigned timeout_ms = 30000;
};

/// OpenAI-compatible embeddings endpoint. Returned vectors are L2-normalized.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig config);

    [[nodiscard]] std::size_t dimension() const noexcept override { return config_.dimension; }
    [[nodiscard]] std::string id() const override;

protected:
    Vector do_embed(std::string_view text) override;

private:
    RemoteEmbedderConfig config_;
};

/// Scales `v` to unit length in place; leaves an all-zero vector untouched.
void l2_normalize(std::span<double> v) noexcept;

/// Non-squared Euclidean distance.
double l2_distance(std::span<const double> a, std::span<const double> b) noexcept;

/// Vectors keyed by (embedder id, text). Persisted as the embeddings.bin
/// sidecar: "L2RV1", u32 LE dimension, then (u64 LE id, dimension x f64 LE)
/// records.
class EmbeddingCache {
public:
    EmbeddingCache() = default;

    [[nodiscard]] const Vector* lookup(std::string_view embedder_id, std::string_view text) const;
    void store(std::string_view embedder_id, std::string_view text, Vector vector);
    [[nodiscard]] std::size_t size() const noexcept { return vectors_.size(); }

    /// Reads a sidecar and attaches each record to the current text of its id
    /// in `kb`. Throws CacheCorrupt on bad magic, dimension mismatch, or a
    /// truncated record; IoError if the file is unreadable.
    void load_sidecar(const std::string& path, const KnowledgeBase& kb, std::string_view embedder_id,
                      std::size_t dimension);

    /// Like load_sidecar, but a missing or corrupt file leaves the cache empty
    /// (full rebuild). Returns true when records were loaded.
    bool try_load_sidecar(const std::string& path, const KnowledgeBase& kb, std::string_view embedder_id,
                          std::size_t dimension) noexcept;

private:
    static std::uint64_t key(std::string_view embedder_id, std::string_view text) noexcept;

    std::unordered_map<std::uint64_t, Vector> vectors_;
};

struct RetrievalHit {
    EntryId entry_id = 0;
    double confidence = 0.0;
    double distance = 0.0;
    std::string text;

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Hits sorted ascending by distance, ties by ascending id.
struct RetrievalSet {
    std::vector<RetrievalHit> hits;
    std::size_t k_requested = 0;
    std::string query_text;

    [[nodiscard]] bool contains(EntryId id) const noexcept;
};

/// Exact, immutable vector index over the eligible entries of a knowledge base.
class VectorIndex {
public:
    struct Item {
        EntryId id = 0;
        double confidence = 0.0;
        std::string text;
    };

    VectorIndex() = default;
    VectorIndex(std::string embedder_id, std::size_t dimension) : embedder_id_(std::move(embedder_id)), dimension_(dimension) {}

    void add(Item item, std::span<const double> vector);

    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] const std::string& embedder_id() const noexcept { return embedder_id_; }
    [[nodiscard]] const Item& item(std::size_t i) const { return items_[i]; }
    [[nodiscard]] std::span<const double> vector(std::size_t i) const {
        return {data_.data() + i * dimension_, dimension_};
    }

    /// Exhaustive scan. `k` must be at least 1.
    [[nodiscard]] RetrievalSet search(std::span<const double> query, std::size_t k,
                                      std::string query_text = {}) const;

    /// Writes the sidecar for every indexed vector.
    void save_sidecar(const std::string& path) const;

private:
    std::string embedder_id_;
    std::size_t dimension_ = 0;
    std::vector<Item> items_;
    std::vector<double> data_;
};

/// Entries are eligible when not deleted and confidence > 0. Vectors come from
/// `cache` when present; misses call the embedder and are stored back.
VectorIndex build_index(const KnowledgeBase& kb, Embedder& embedder, EmbeddingCache* cache = nullptr);

RetrievalSet retrieve_top_k(const VectorIndex& index, Embedder& embedder, std::string_view query,
                            std::size_t k = kDefaultTopK);

}  // namespace l2r
