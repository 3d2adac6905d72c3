#include "l2r/pipeline.hpp"

#include "l2r/errors.hpp"

#include <cmath>

namespace l2r {

namespace {

const char* const kReasoningLine = "REASONING: <step-by-step reasoning from the cited knowledge to the answer>\n";

nlohmann::ordered_json score_json(double score) {
    if (std::isinf(score)) return nullptr;
    return score;
}

}  // namespace

std::string_view to_string(Task task) noexcept {
    switch (task) {
        case Task::open: return "open";
        case Task::mc1: return "mc1";
        case Task::mc2: return "mc2";
    }
    return "open";
}

std::optional<Task> task_from_string(std::string_view name) noexcept {
    if (name == "open") return Task::open;
    if (name == "mc1") return Task::mc1;
    if (name == "mc2") return Task::mc2;
    return std::nullopt;
}

std::string_view to_string(Status status) noexcept { return status == Status::answered ? "answered" : "refused"; }

std::string_view to_string(RefusalCause cause) noexcept { return cause == RefusalCause::hard ? "hard" : "soft"; }

nlohmann::ordered_json to_json(const QAResponse& response, std::string_view id) {
    nlohmann::ordered_json out;
    out["id"] = id;
    out["status"] = to_string(response.status);
    out["refusal_cause"] = response.refusal_cause ? nlohmann::ordered_json(to_string(*response.refusal_cause))
                                                  : nlohmann::ordered_json(nullptr);
    auto evidence = nlohmann::ordered_json::array();
    for (const auto& e : response.evidence) {
        evidence.push_back({{"id", e.id}, {"text", e.text}, {"confidence", e.confidence}, {"distance", e.distance}});
    }
    out["evidence"] = std::move(evidence);
    out["reasoning"] = response.reasoning;
    out["answer"] = response.answer;
    const auto& j = response.judgment;
    out["judgment"] = {{"i_soft", j.i_soft},
                       {"i_hard", j.i_hard},
                       {"i_final", j.i_final},
                       {"min_score", score_json(j.min_penalized_score)},
                       {"alpha", j.alpha_used}};
    auto retrieval = nlohmann::ordered_json::array();
    for (const auto& h : response.retrieval.hits) {
        retrieval.push_back({{"id", h.entry_id}, {"confidence", h.confidence}, {"distance", h.distance}});
    }
    out["retrieval"] = std::move(retrieval);
    return out;
}

Pipeline::Pipeline(std::shared_ptr<const VectorIndex> index, Embedder& embedder, ChatProvider& provider,
                   const PromptLibrary& prompts, PipelineConfig config, std::shared_ptr<const JudgePolicy> judge)
    : index_(index ? std::move(index) : std::make_shared<const VectorIndex>()),
      embedder_(&embedder),
      provider_(&provider),
      prompts_(&prompts),
      config_(config),
      judge_(judge ? std::move(judge) : std::make_shared<MinPenalizedScoreJudge>()) {
    if (config_.k == 0) throw ConfigError("k must be at least 1");
    HardPolicy{config_.refusal.alpha}.validate();
}

std::string Pipeline::format_mc_prompt(std::string_view question, const std::vector<std::string>& choices,
                                       Task task) const {
    if (task == Task::open) throw PreconditionError("format_mc_prompt needs an mc1 or mc2 task");
    if (choices.size() < 2) throw TooFewChoices("multiple-choice questions need at least 2 choices");
    if (choices.size() > 26) throw PreconditionError("at most 26 choices are supported");
    std::string options;
    for (std::size_t i = 0; i < choices.size(); ++i) {
        if (i) options += '\n';
        options += option_letter(i);
        options += ". ";
        options += choices[i];
    }
    SlotMap slots{{"question", std::string(question)}, {"options", options}, {"count", std::to_string(choices.size())}};
    auto name = task == Task::mc1 ? TemplateName::mc1_wrap : TemplateName::mc2_wrap;
    return render_prompt(prompts_->get(name), slots);
}

std::string Pipeline::render_main_prompt(const Question& question, const RetrievalSet& retrieval) const {
    std::string body = question.task == Task::open ? question.text
                                                   : format_mc_prompt(question.text, question.choices, question.task);
    SlotMap slots{{"knowledge", format_knowledge_lines(retrieval)},
                  {"question", std::move(body)},
                  {"reasoning_format", config_.step_by_step ? kReasoningLine : ""}};
    return render_prompt(prompts_->get(TemplateName::main_qa), slots);
}

QAResponse Pipeline::answer_question(const Question& question, const AskOverrides& overrides) const {
    return run(question, overrides, false);
}

QAResponse Pipeline::forced_answer(const Question& question, const AskOverrides& overrides) const {
    return run(question, overrides, true);
}

QAResponse Pipeline::run(const Question& question, const AskOverrides& overrides, bool forced) const {
    const auto k = overrides.k.value_or(config_.k);
    const HardPolicy policy{overrides.alpha.value_or(config_.refusal.alpha)};
    if (k == 0) throw PreconditionError("k must be at least 1");
    policy.validate();
    if (question.task != Task::open && question.choices.size() < 2) {
        throw TooFewChoices("multiple-choice questions need at least 2 choices");
    }

    QAResponse response;
    response.forced = forced;
    response.retrieval = retrieve_top_k(*index_, *embedder_, question.text, k);

    auto hard = judge_->judge(response.retrieval, policy);
    auto& judgment = response.judgment;
    judgment.alpha_used = policy.alpha;
    judgment.min_penalized_score = hard.min_penalized_score;
    judgment.i_hard = config_.refusal.hard_enabled ? hard.pass : true;

    if (!judgment.i_hard && !forced) {
        judgment.i_soft = false;
        judgment.i_final = false;
        response.status = Status::refused;
        response.refusal_cause = RefusalCause::hard;
        return response;
    }

    auto reply = provider_->complete(user_prompt(render_main_prompt(question, response.retrieval)));
    response.audit_id = reply.audit_id;
    MainQAOutput parsed;
    try {
        parsed = parse_main_qa_output(reply.text);
    } catch (const ParseError& e) {
        throw PipelineError(std::string("unparseable model output: ") + e.what(), reply.text, reply.audit_id);
    }
    for (auto id : parsed.evidence_ids) {
        if (!response.retrieval.contains(id)) {
            throw PipelineError("model cited knowledge id " + std::to_string(id) + " that was not retrieved",
                                reply.text, reply.audit_id);
        }
    }

    judgment.i_soft = config_.refusal.soft_enabled ? parsed.answerable : true;
    judgment.i_final = combine(judgment.i_soft, judgment.i_hard);

    if (!judgment.i_final && !forced) {
        response.status = Status::refused;
        response.refusal_cause = RefusalCause::soft;
        return response;
    }

    response.status = Status::answered;
    if (parsed.evidence_ids.empty()) {
        for (const auto& hit : response.retrieval.hits) {
            response.evidence.push_back({hit.entry_id, hit.text, hit.confidence, hit.distance});
        }
    } else {
        for (auto id : parsed.evidence_ids) {
            for (const auto& hit : response.retrieval.hits) {
                if (hit.entry_id == id) response.evidence.push_back({hit.entry_id, hit.text, hit.confidence, hit.distance});
            }
        }
    }
    response.reasoning = config_.step_by_step ? parsed.reasoning : std::string{};
    response.answer = parsed.answer;
    return response;
}

}  // namespace l2r
