#pragma once

#include "l2r/agents.hpp"
#include "l2r/errors.hpp"
#include "l2r/knowledge_store.hpp"
#include "l2r/llm_gateway.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace l2r {

enum class ReviewStatus { pending_review, auto_accepted, approved, rejected };
enum class JobState { pending, running, done, failed };

std::string_view to_string(ReviewStatus status) noexcept;
std::string_view to_string(JobState state) noexcept;

struct ProducedItem {
    KnowledgeEntry entry;
    ReviewStatus status = ReviewStatus::pending_review;
};

struct AkeError {
    std::string stage;  // "generate", "answer", "transform", "validate"
    std::string question;
    std::string message;
};

/// Automatic knowledge enrichment run: seeds -> questions -> answers with
/// confidence -> one-sentence knowledge.
struct AkeJob {
    std::string job_id;
    std::vector<std::string> seeds;
    std::size_t m_target = 0;
    JobState state = JobState::pending;
    std::vector<ProducedItem> produced;
    std::vector<AkeError> errors;
    std::size_t duplicates_skipped = 0;

    [[nodiscard]] ProducedItem* find(EntryId id);
};

nlohmann::ordered_json to_json(const AkeJob& job);
AkeJob job_from_json(const nlohmann::json& record);

/// Jobs live in `<dir>/jobs.jsonl`, one record per job.
void save_jobs(const std::string& dir, const std::vector<AkeJob>& jobs);
std::vector<AkeJob> load_jobs(const std::string& dir);

/// Question generation failed mid-way; carries what was generated before the failure.
class PartialGenerationError : public GatewayError {
public:
    PartialGenerationError(const std::string& what, std::vector<std::string> partial)
        : GatewayError(what), partial_(std::move(partial)) {}

    [[nodiscard]] const std::vector<std::string>& partial() const noexcept { return partial_; }

private:
    std::vector<std::string> partial_;
};

struct AkeConfig {
    /// Questions requested per seed.
    unsigned fan_out = 1;
    /// Answer/transform calls in flight.
    unsigned parallelism = 4;
};

class KnowledgeEnricher {
public:
    KnowledgeEnricher(ChatProvider& provider, const PromptLibrary& prompts, AkeConfig config = {});

    /// One knowledge_q call per seed until `m` unique questions exist or the
    /// seeds run out. Unparseable replies are skipped (and recorded in
    /// `errors` when given).
    std::vector<std::string> generate_questions(const std::vector<std::string>& seeds, std::size_t m,
                                                std::vector<AkeError>* errors = nullptr) const;

    ConfidenceAnswer answer_with_confidence(std::string_view question) const;

    /// Pending entry (id 0, source ake) carrying `confidence` unchanged.
    KnowledgeEntry qa_pair_to_knowledge(std::string_view question, std::string_view answer, double confidence) const;

    /// Runs all three stages. auto_accept appends to `kb`; otherwise entries
    /// get reserved ids and wait for review. Existing entries are never
    /// modified and exact-text duplicates are skipped.
    AkeJob enrich(KnowledgeBase& kb, const std::vector<std::string>& seeds, std::size_t m, bool auto_accept,
                  std::string job_id = "ake-1") const;

private:
    ChatProvider* provider_;
    const PromptLibrary* prompts_;
    AkeConfig config_;
};

/// Moves a pending entry into the KB. `verified` sets confidence to 1.0.
/// Throws NotFoundError for unknown ids and ConflictError when already resolved.
const KnowledgeEntry& approve_entry(KnowledgeBase& kb, AkeJob& job, EntryId id, bool verified);
void reject_entry(AkeJob& job, EntryId id);

}  // namespace l2r
