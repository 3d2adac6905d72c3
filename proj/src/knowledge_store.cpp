#include "l2r/knowledge_store.hpp"

#include "l2r/errors.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

namespace l2r {

namespace {

bool is_terminal_mark(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t code_points(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

// Calls on_boundary(end_offset) after every run of terminal marks that is
// followed by whitespace or the end of the text.
template <typename F>
void for_each_sentence_end(std::string_view text, F&& on_boundary) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_terminal_mark(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_terminal_mark(text[j])) ++j;
        if (j == text.size() || is_space(text[j])) on_boundary(j);
        i = j;
    }
}

std::size_t count_tokens(std::string_view s) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : s) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

void check_confidence(double confidence) {
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw RangeError("confidence " + format_decimal(confidence) + " outside [0, 1]");
    }
}

}  // namespace

std::string_view to_string(Source source) noexcept {
    switch (source) {
        case Source::manual: return "manual";
        case Source::ake: return "ake";
        case Source::corpus: return "corpus";
    }
    return "manual";
}

std::optional<Source> source_from_string(std::string_view name) noexcept {
    if (name == "manual") return Source::manual;
    if (name == "ake") return Source::ake;
    if (name == "corpus") return Source::corpus;
    return std::nullopt;
}

bool KnowledgeEntry::deleted() const {
    auto it = meta.find("deleted");
    return it != meta.end() && it->is_boolean() && it->get<bool>();
}

void validate_single_fact(std::string_view text) {
    auto body = trim(text);
    if (body.empty()) throw ValidationError("knowledge text is empty");
    if (code_points(body) > kMaxFactLength) {
        throw ValidationError("knowledge text exceeds " + std::to_string(kMaxFactLength) + " characters");
    }
    std::size_t marks = 0;
    for_each_sentence_end(body, [&](std::size_t) { ++marks; });
    if (marks > 1) throw ValidationError("knowledge text holds more than one sentence: " + std::string(body));
}

std::vector<std::string> split_sentences(std::string_view text, std::size_t min_tokens) {
    std::vector<std::string> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        auto piece = trim(text.substr(start, end - start));
        if (!piece.empty() && count_tokens(piece) >= min_tokens) out.emplace_back(piece);
        start = end;
    };
    for_each_sentence_end(text, emit);
    if (start < text.size()) emit(text.size());
    return out;
}

std::string to_canonical_json(const KnowledgeEntry& entry) {
    nlohmann::ordered_json record;
    record["id"] = entry.id;
    record["text"] = entry.text;
    record["confidence"] = entry.confidence;
    record["source"] = to_string(entry.source);
    record["created_at"] = entry.created_at;
    record["meta"] = entry.meta;
    return record.dump();
}

KnowledgeEntry entry_from_json(const nlohmann::json& record, std::size_t line) {
    auto fail = [line](const std::string& what) { throw ParseError(what, line); };
    if (!record.is_object()) fail("knowledge record must be a JSON object");

    KnowledgeEntry entry;
    auto id = record.find("id");
    if (id == record.end() || !id->is_number_unsigned()) fail("'id' must be an unsigned integer");
    entry.id = id->get<EntryId>();

    auto text = record.find("text");
    if (text == record.end() || !text->is_string()) fail("'text' must be a string");
    entry.text = text->get<std::string>();
    if (trim(entry.text).empty()) fail("'text' is empty");

    auto conf = record.find("confidence");
    if (conf == record.end() || !conf->is_number()) fail("'confidence' must be a number");
    entry.confidence = conf->get<double>();
    if (!(entry.confidence >= 0.0 && entry.confidence <= 1.0)) fail("'confidence' outside [0, 1]");

    auto source = record.find("source");
    if (source == record.end() || !source->is_string()) fail("'source' must be a string");
    auto parsed = source_from_string(source->get<std::string>());
    if (!parsed) fail("unknown source '" + source->get<std::string>() + "'");
    entry.source = *parsed;

    auto created = record.find("created_at");
    if (created == record.end() || !created->is_string()) fail("'created_at' must be a string");
    entry.created_at = created->get<std::string>();

    auto meta = record.find("meta");
    if (meta != record.end()) {
        if (!meta->is_object()) fail("'meta' must be an object");
        entry.meta = *meta;
    }
    return entry;
}

KnowledgeBase::KnowledgeBase(std::string embedder_id, Clock clock)
    : embedder_id_(std::move(embedder_id)), clock_(clock ? std::move(clock) : Clock(now_rfc3339)) {}

const KnowledgeEntry& KnowledgeBase::append(KnowledgeEntry entry) {
    if (index_.contains(entry.id)) throw DuplicateIdError(entry.id);
    index_.emplace(entry.id, entries_.size());
    next_id_ = std::max(next_id_, entry.id + 1);
    entries_.push_back(std::move(entry));
    return entries_.back();
}

const KnowledgeEntry& KnowledgeBase::upsert_entry(std::string_view text, double confidence, Source source,
                                                  bool verified) {
    validate_single_fact(text);
    check_confidence(confidence);
    KnowledgeEntry entry;
    entry.id = next_id_;
    entry.text = std::string(trim(text));
    entry.confidence = verified ? 1.0 : confidence;
    entry.source = verified ? Source::manual : source;
    entry.created_at = clock_();
    if (verified) entry.meta["verified"] = true;
    return append(std::move(entry));
}

const KnowledgeEntry& KnowledgeBase::insert_reserved(KnowledgeEntry entry) {
    validate_single_fact(entry.text);
    check_confidence(entry.confidence);
    if (entry.id == 0 || entry.id >= next_id_) {
        throw PreconditionError("id " + std::to_string(entry.id) + " was not reserved");
    }
    if (entry.created_at.empty()) entry.created_at = clock_();
    return append(std::move(entry));
}

std::size_t KnowledgeBase::import_file(const std::string& path, ImportMode mode, double default_confidence) {
    auto contents = read_file(path);
    return mode == ImportMode::kb_jsonl ? import_jsonl(contents) : import_corpus(contents, default_confidence);
}

std::size_t KnowledgeBase::import_jsonl(std::string_view contents) {
    // Parse everything first so a bad line leaves the KB untouched.
    std::vector<KnowledgeEntry> parsed;
    std::unordered_map<EntryId, std::size_t> seen;
    auto lines = split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line_no = i + 1;
        if (trim(lines[i]).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        auto entry = entry_from_json(record, line_no);
        if (seen.contains(entry.id) || index_.contains(entry.id)) throw DuplicateIdError(entry.id, line_no);
        seen.emplace(entry.id, line_no);
        parsed.push_back(std::move(entry));
    }
    for (auto& entry : parsed) append(std::move(entry));
    return parsed.size();
}

std::size_t KnowledgeBase::import_corpus(std::string_view text, double default_confidence) {
    check_confidence(default_confidence);
    std::size_t added = 0;
    for (const auto& sentence : split_sentences(text)) {
        if (code_points(sentence) > kMaxFactLength) continue;
        upsert_entry(sentence, default_confidence, Source::corpus);
        ++added;
    }
    return added;
}

KnowledgeEntry& KnowledgeBase::mutable_at(EntryId id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("no knowledge entry with id " + std::to_string(id));
    return entries_[it->second];
}

const KnowledgeEntry& KnowledgeBase::set_confidence(EntryId id, double confidence) {
    auto& entry = mutable_at(id);
    check_confidence(confidence);
    entry.confidence = confidence;
    // Verified means C = 1; a curator lowering it revokes the mark.
    if (confidence != 1.0 && entry.meta.value("verified", false)) entry.meta["verified"] = false;
    entry.meta["updated_at"] = clock_();
    return entry;
}

const KnowledgeEntry& KnowledgeBase::update_text(EntryId id, std::string_view text) {
    auto& entry = mutable_at(id);
    validate_single_fact(text);
    entry.text = std::string(trim(text));
    entry.meta["updated_at"] = clock_();
    return entry;
}

void KnowledgeBase::remove(EntryId id) {
    auto& entry = mutable_at(id);
    entry.meta["deleted"] = true;
    entry.meta["deleted_at"] = clock_();
}

std::string KnowledgeBase::export_jsonl() const {
    std::string out;
    for (const auto& entry : entries_) {
        out += to_canonical_json(entry);
        out += '\n';
    }
    return out;
}

std::size_t KnowledgeBase::export_file(const std::string& path) const {
    write_file(path, export_jsonl());
    return entries_.size();
}

const KnowledgeEntry* KnowledgeBase::find(EntryId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const KnowledgeEntry& KnowledgeBase::at(EntryId id) const {
    if (const auto* entry = find(id)) return *entry;
    throw NotFoundError("no knowledge entry with id " + std::to_string(id));
}

std::size_t KnowledgeBase::active_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return !e.deleted(); }));
}

bool KnowledgeBase::contains_text(std::string_view text) const {
    auto needle = trim(text);
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return !e.deleted() && e.text == needle; });
}

KnowledgeBase KnowledgeBase::load_dir(const std::string& dir, std::string embedder_id, Clock clock) {
    KnowledgeBase kb(std::move(embedder_id), std::move(clock));
    auto path = std::filesystem::path(dir) / "kb.jsonl";
    if (std::filesystem::exists(path)) kb.import_file(path.string(), ImportMode::kb_jsonl);
    return kb;
}

void KnowledgeBase::save_dir(const std::string& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto path = std::filesystem::path(dir) / "kb.jsonl";
    auto tmp = path;
    tmp += ".tmp";
    export_file(tmp.string());
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace l2r
