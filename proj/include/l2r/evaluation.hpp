#pragma once

#include "l2r/pipeline.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace l2r {

struct DatasetRecord {
    std::string id;
    Task task = Task::mc1;
    std::string question;
    std::vector<std::string> choices;
    /// mc1: exactly one index; mc2: every true index.
    std::vector<std::size_t> gold;
    std::optional<std::vector<std::string>> gold_knowledge;
    std::optional<std::string> category;

    [[nodiscard]] Question as_question() const { return {question, choices, task}; }
};

/// JSONL: {"id","task","question","choices","gold","gold_knowledge"?,"category"?}.
/// Malformed JSON raises ParseError, schema violations SchemaError; both carry the line.
std::vector<DatasetRecord> parse_dataset(std::string_view contents);
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// Scoring in "judgment units": one per mc1 question, one per option for mc2.
struct Score {
    std::size_t correct_units = 0;
    std::size_t total_units = 0;
    /// Question-level verdict: mc1 choice in gold; mc2 every option labelled right.
    bool question_correct = false;
    bool parsed = false;
};

Score score_answer(const DatasetRecord& record, std::string_view answer);

struct QuestionOutcome {
    std::string id;
    Task task = Task::mc1;
    Status status = Status::refused;
    std::optional<RefusalCause> cause;
    bool error = false;
    std::string error_message;
    bool i_soft = false;
    bool i_hard = false;
    double min_score = kNoEvidenceScore;
    std::string answer;
    Score score;
};

struct EvalReport {
    std::size_t total = 0;
    std::size_t answered = 0;
    /// In judgment units; equals question count for mc1-only datasets.
    std::size_t correct = 0;
    std::size_t answered_units = 0;
    double accuracy = 0.0;
    /// False when nothing was answered (accuracy is then reported as 0).
    bool accuracy_defined = false;
    std::size_t refusals_hard = 0;
    std::size_t refusals_soft = 0;
    /// Subset of refusals_soft caused by pipeline/provider errors.
    std::size_t errors = 0;
    std::optional<double> success_rate;
    double alpha = kDefaultAlpha;
    std::size_t k = kDefaultTopK;
    std::vector<QuestionOutcome> per_question;
};

nlohmann::ordered_json to_json(const EvalReport& report);

struct EvalOptions {
    unsigned parallelism = 1;
    AskOverrides overrides;
};

/// Normal (gated) run over the dataset. Per-question errors count as soft
/// refusals with the error flag set.
EvalReport run_eval(const std::vector<DatasetRecord>& dataset, const Pipeline& pipeline, const EvalOptions& options = {});

/// Tallies answered/correct/refusals from per-question outcomes.
EvalReport summarize(std::vector<QuestionOutcome> outcomes, double alpha, std::size_t k);

struct SuccessRate {
    std::size_t refused = 0;
    std::size_t would_be_incorrect = 0;
    /// Absent when nothing was refused.
    std::optional<double> rate;
};

/// would_be_incorrect / refused, or absent for refused == 0.
SuccessRate success_rate(std::size_t refused, std::size_t would_be_incorrect);

/// Forced answers for every question `report` refused; a forced answer that
/// errors counts as incorrect. Stores the rate on the report.
SuccessRate refusal_success_rate(EvalReport& report, const std::vector<DatasetRecord>& dataset,
                                 const Pipeline& pipeline, const EvalOptions& options = {});

/// Per-question replay data from one forced-mode pass.
struct ForcedRecord {
    std::string id;
    double min_score = kNoEvidenceScore;
    bool i_soft = false;
    bool error = false;
    Score score;
};

using ForcedCache = std::vector<ForcedRecord>;

ForcedCache record_forced_pass(const std::vector<DatasetRecord>& dataset, const Pipeline& pipeline,
                               const EvalOptions& options = {});
std::string forced_cache_jsonl(const ForcedCache& cache);
ForcedCache parse_forced_cache(std::string_view contents);

struct SweepPoint {
    double alpha = 0.0;
    std::size_t answered = 0;
    std::size_t refused = 0;
    std::size_t correct_units = 0;
    std::size_t answered_units = 0;
    std::size_t total_units = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Offline replay: answered(alpha) = {q : !error && min_score < alpha && i_soft}.
/// Throws MissingCache for an empty cache.
std::vector<SweepPoint> sweep_alpha(const ForcedCache& cache, std::span<const double> alphas);

/// "alpha,answered,refused,accuracy,precision,recall" with LF endings.
std::string sweep_csv(const std::vector<SweepPoint>& points);

struct RatioRow {
    double ratio = 0.0;
    std::size_t kb_entries = 0;
    std::size_t answered = 0;
    double accuracy = 0.0;
    bool accuracy_defined = false;
};

/// For each ratio r: KB of the gold knowledge of the first floor(r * n)
/// records at confidence 1.0, fresh index, gated eval over the whole dataset.
std::vector<RatioRow> gold_ratio_experiment(const std::vector<DatasetRecord>& dataset, std::span<const double> ratios,
                                            Embedder& embedder, ChatProvider& provider, const PromptLibrary& prompts,
                                            const PipelineConfig& config, const EvalOptions& options = {});

/// "ratio,kb_entries,answered,accuracy".
std::string ratio_csv(const std::vector<RatioRow>& rows);

}  // namespace l2r
