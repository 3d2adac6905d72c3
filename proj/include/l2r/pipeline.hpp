#pragma once

#include "l2r/agents.hpp"
#include "l2r/llm_gateway.hpp"
#include "l2r/refusal.hpp"
#include "l2r/retrieval.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace l2r {

enum class Task { open, mc1, mc2 };
enum class Status { answered, refused };
enum class RefusalCause { hard, soft };

std::string_view to_string(Task task) noexcept;
std::optional<Task> task_from_string(std::string_view name) noexcept;
std::string_view to_string(Status status) noexcept;
std::string_view to_string(RefusalCause cause) noexcept;

struct Question {
    std::string text;
    std::vector<std::string> choices;
    Task task = Task::open;
};

struct Evidence {
    EntryId id = 0;
    std::string text;
    double confidence = 0.0;
    double distance = 0.0;

    friend bool operator==(const Evidence&, const Evidence&) = default;
};

/// REFUSAL, or evidence + reasoning + answer. `judgment` is always filled.
struct QAResponse {
    Status status = Status::refused;
    std::optional<RefusalCause> refusal_cause;
    std::vector<Evidence> evidence;
    std::string reasoning;
    std::string answer;
    Judgment judgment;
    RetrievalSet retrieval;
    /// Audit id of the model call, 0 when no call was made.
    std::uint64_t audit_id = 0;
    bool forced = false;
};

/// One JSONL record: {id, status, refusal_cause, evidence, reasoning, answer,
/// judgment:{i_soft, i_hard, i_final, min_score, alpha}, retrieval}. An
/// infinite min_score is written as null.
nlohmann::ordered_json to_json(const QAResponse& response, std::string_view id);

struct PipelineConfig {
    std::size_t k = kDefaultTopK;
    RefusalConfig refusal;
    bool step_by_step = true;
};

struct AskOverrides {
    std::optional<double> alpha;
    std::optional<std::size_t> k;
};

/// Per-question orchestration: retrieve, hard gate, one main-QA call that
/// carries the soft judgment and the step-by-step answer, then assembly.
/// Borrowed collaborators must outlive the pipeline.
class Pipeline {
public:
    Pipeline(std::shared_ptr<const VectorIndex> index, Embedder& embedder, ChatProvider& provider,
             const PromptLibrary& prompts, PipelineConfig config,
             std::shared_ptr<const JudgePolicy> judge = std::make_shared<MinPenalizedScoreJudge>());

    /// Hard-refused questions return without any provider call.
    QAResponse answer_question(const Question& question, const AskOverrides& overrides = {}) const;

    /// Same flow with both gates bypassed for the decision; the judgment is
    /// still computed and recorded.
    QAResponse forced_answer(const Question& question, const AskOverrides& overrides = {}) const;

    /// Question text plus lettered options wrapped by the mc1/mc2 template.
    std::string format_mc_prompt(std::string_view question, const std::vector<std::string>& choices, Task task) const;

    /// The full main-QA prompt for a question and its retrieval set.
    std::string render_main_prompt(const Question& question, const RetrievalSet& retrieval) const;

    [[nodiscard]] const PipelineConfig& config() const noexcept { return config_; }
    [[nodiscard]] const VectorIndex& index() const noexcept { return *index_; }

private:
    QAResponse run(const Question& question, const AskOverrides& overrides, bool forced) const;

    std::shared_ptr<const VectorIndex> index_;
    Embedder* embedder_;
    ChatProvider* provider_;
    const PromptLibrary* prompts_;
    PipelineConfig config_;
    std::shared_ptr<const JudgePolicy> judge_;
};

}  // namespace l2r
