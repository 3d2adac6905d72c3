#pragma once

#include "l2r/util.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace l2r {

using EntryId = std::uint64_t;

enum class Source { manual, ake, corpus };

std::string_view to_string(Source source) noexcept;
std::optional<Source> source_from_string(std::string_view name) noexcept;

inline constexpr std::size_t kMaxFactLength = 500;

/// One factual statement with its trust score.
struct KnowledgeEntry {
    EntryId id = 0;
    std::string text;
    double confidence = 1.0;
    Source source = Source::manual;
    std::string created_at;
    nlohmann::json meta = nlohmann::json::object();

    /// Soft-deleted entries stay resolvable but are never indexed.
    [[nodiscard]] bool deleted() const;

    friend bool operator==(const KnowledgeEntry&, const KnowledgeEntry&) = default;
};

/// Throws ValidationError unless `text` is a single syntactic fact: non-empty
/// after trimming, at most kMaxFactLength code points, and at most one
/// sentence-terminal mark (a run of . ! ? followed by whitespace or the end).
void validate_single_fact(std::string_view text);

/// Sentence segmentation used by corpus import: splits after a run of . ! ?
/// that is followed by whitespace, trims, and drops fragments with fewer
/// than `min_tokens` whitespace-separated tokens.
std::vector<std::string> split_sentences(std::string_view text, std::size_t min_tokens = 3);

/// Canonical single-line JSON form (key order id, text, confidence, source,
/// created_at, meta). No trailing newline.
std::string to_canonical_json(const KnowledgeEntry& entry);

/// Inverse of to_canonical_json. `line` is used for error messages only.
KnowledgeEntry entry_from_json(const nlohmann::json& record, std::size_t line = 0);

enum class ImportMode { kb_jsonl, corpus_text };

class KnowledgeBase {
public:
    explicit KnowledgeBase(std::string embedder_id = {}, Clock clock = now_rfc3339);

    /// Adds a new entry with a fresh id. `verified` forces confidence 1.0 and
    /// source manual.
    const KnowledgeEntry& upsert_entry(std::string_view text, double confidence, Source source,
                                       bool verified = false);

    /// Inserts an entry whose id was obtained from reserve_id() (AKE review path).
    const KnowledgeEntry& insert_reserved(KnowledgeEntry entry);

    std::size_t import_file(const std::string& path, ImportMode mode, double default_confidence = 1.0);
    std::size_t import_jsonl(std::string_view contents);
    std::size_t import_corpus(std::string_view text, double default_confidence);

    const KnowledgeEntry& set_confidence(EntryId id, double confidence);
    const KnowledgeEntry& update_text(EntryId id, std::string_view text);
    void remove(EntryId id);

    [[nodiscard]] std::string export_jsonl() const;
    std::size_t export_file(const std::string& path) const;

    [[nodiscard]] const KnowledgeEntry* find(EntryId id) const;
    [[nodiscard]] const KnowledgeEntry& at(EntryId id) const;
    [[nodiscard]] std::span<const KnowledgeEntry> entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] std::size_t active_count() const;
    /// Exact-text match against live (not deleted) entries.
    [[nodiscard]] bool contains_text(std::string_view text) const;

    [[nodiscard]] EntryId next_id() const noexcept { return next_id_; }
    EntryId reserve_id() noexcept { return next_id_++; }
    /// Keeps ids handed out earlier (e.g. pending review items) from being reused.
    void bump_next_id(EntryId at_least) noexcept { next_id_ = next_id_ < at_least ? at_least : next_id_; }

    [[nodiscard]] const std::string& embedder_id() const noexcept { return embedder_id_; }
    void set_embedder_id(std::string id) { embedder_id_ = std::move(id); }

    /// Storage layout: `dir/kb.jsonl` (+ embeddings.bin owned by retrieval).
    static KnowledgeBase load_dir(const std::string& dir, std::string embedder_id = {},
                                  Clock clock = now_rfc3339);
    void save_dir(const std::string& dir) const;

private:
    KnowledgeEntry& mutable_at(EntryId id);
    const KnowledgeEntry& append(KnowledgeEntry entry);

    std::vector<KnowledgeEntry> entries_;
    std::unordered_map<EntryId, std::size_t> index_;
    EntryId next_id_ = 1;
    std::string embedder_id_;
    Clock clock_;
};

}  // namespace l2r
