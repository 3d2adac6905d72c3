#include "l2r/ake.hpp"

#include "l2r/parallel.hpp"
#include "l2r/util.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>

namespace l2r {

std::string_view to_string(ReviewStatus status) noexcept {
    switch (status) {
        case ReviewStatus::pending_review: return "pending_review";
        case ReviewStatus::auto_accepted: return "auto_accepted";
        case ReviewStatus::approved: return "approved";
        case ReviewStatus::rejected: return "rejected";
    }
    return "pending_review";
}

std::string_view to_string(JobState state) noexcept {
    switch (state) {
        case JobState::pending: return "pending";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "pending";
}

namespace {

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view name, const Enum (&values)[N], const char* what) {
    for (auto v : values) {
        if (to_string(v) == name) return v;
    }
    throw ParseError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

}  // namespace

ProducedItem* AkeJob::find(EntryId id) {
    for (auto& item : produced) {
        if (item.entry.id == id) return &item;
    }
    return nullptr;
}

nlohmann::ordered_json to_json(const AkeJob& job) {
    nlohmann::ordered_json out;
    out["job_id"] = job.job_id;
    out["state"] = to_string(job.state);
    out["m_target"] = job.m_target;
    out["seeds"] = job.seeds;
    auto produced = nlohmann::ordered_json::array();
    for (const auto& item : job.produced) {
        produced.push_back({{"entry", nlohmann::ordered_json::parse(to_canonical_json(item.entry))},
                            {"status", to_string(item.status)}});
    }
    out["produced"] = std::move(produced);
    auto errors = nlohmann::ordered_json::array();
    for (const auto& e : job.errors) {
        errors.push_back({{"stage", e.stage}, {"question", e.question}, {"message", e.message}});
    }
    out["errors"] = std::move(errors);
    out["duplicates_skipped"] = job.duplicates_skipped;
    return out;
}

AkeJob job_from_json(const nlohmann::json& record) {
    static constexpr JobState kStates[] = {JobState::pending, JobState::running, JobState::done, JobState::failed};
    static constexpr ReviewStatus kStatuses[] = {ReviewStatus::pending_review, ReviewStatus::auto_accepted,
                                                 ReviewStatus::approved, ReviewStatus::rejected};
    AkeJob job;
    try {
        job.job_id = record.at("job_id").get<std::string>();
        job.state = enum_from(record.at("state").get<std::string>(), kStates, "job state");
        job.m_target = record.value("m_target", std::size_t{0});
        job.seeds = record.value("seeds", std::vector<std::string>{});
        for (const auto& item : record.at("produced")) {
            job.produced.push_back({entry_from_json(item.at("entry")),
                                    enum_from(item.at("status").get<std::string>(), kStatuses, "review status")});
        }
        for (const auto& e : record.value("errors", nlohmann::json::array())) {
            job.errors.push_back({e.value("stage", ""), e.value("question", ""), e.value("message", "")});
        }
        job.duplicates_skipped = record.value("duplicates_skipped", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed job record: ") + e.what());
    }
    return job;
}

void save_jobs(const std::string& dir, const std::vector<AkeJob>& jobs) {
    std::filesystem::create_directories(dir);
    std::string out;
    for (const auto& job : jobs) out += to_json(job).dump() + "\n";
    write_file((std::filesystem::path(dir) / "jobs.jsonl").string(), out);
}

std::vector<AkeJob> load_jobs(const std::string& dir) {
    auto path = std::filesystem::path(dir) / "jobs.jsonl";
    std::vector<AkeJob> jobs;
    if (!std::filesystem::exists(path)) return jobs;
    auto lines = split_lines(read_file(path.string()));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            jobs.push_back(job_from_json(nlohmann::json::parse(lines[i])));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(e.what(), i + 1);
        }
    }
    return jobs;
}

KnowledgeEnricher::KnowledgeEnricher(ChatProvider& provider, const PromptLibrary& prompts, AkeConfig config)
    : provider_(&provider), prompts_(&prompts), config_(config) {
    if (config_.fan_out == 0) config_.fan_out = 1;
    if (config_.parallelism == 0) config_.parallelism = 1;
}

std::vector<std::string> KnowledgeEnricher::generate_questions(const std::vector<std::string>& seeds, std::size_t m,
                                                               std::vector<AkeError>* errors) const {
    if (m == 0) throw PreconditionError("m must be at least 1");
    if (seeds.empty()) throw PreconditionError("at least one seed question is required");

    std::vector<std::string> out;
    std::set<std::string, std::less<>> seen;
    for (const auto& seed : seeds) {
        if (out.size() >= m) break;
        auto prompt = render_prompt(prompts_->get(TemplateName::knowledge_q),
                                    {{"seed", seed}, {"count", std::to_string(config_.fan_out)}});
        std::string reply;
        try {
            reply = provider_->complete(user_prompt(prompt)).text;
        } catch (const GatewayError& e) {
            throw PartialGenerationError(e.what(), out);
        }
        std::vector<std::string> batch;
        try {
            batch = parse_question_list(reply);
        } catch (const ParseError& e) {
            if (errors) errors->push_back({"generate", seed, e.what()});
            continue;
        }
        for (auto& q : batch) {
            if (out.size() >= m) break;
            if (seen.insert(q).second) out.push_back(std::move(q));
        }
    }
    return out;
}

ConfidenceAnswer KnowledgeEnricher::answer_with_confidence(std::string_view question) const {
    if (trim(question).empty()) throw PreconditionError("question is empty");
    auto prompt = render_prompt(prompts_->get(TemplateName::knowledge_a), {{"question", std::string(question)}});
    return parse_confidence_answer(provider_->complete(user_prompt(prompt)).text);
}

KnowledgeEntry KnowledgeEnricher::qa_pair_to_knowledge(std::string_view question, std::string_view answer,
                                                       double confidence) const {
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw RangeError("confidence outside [0, 1]");
    auto prompt = render_prompt(prompts_->get(TemplateName::qa2knowledge),
                                {{"question", std::string(question)}, {"answer", std::string(answer)}});
    auto sentence = parse_knowledge_sentence(provider_->complete(user_prompt(prompt)).text);
    validate_single_fact(sentence);

    KnowledgeEntry entry;
    entry.text = std::string(trim(sentence));
    entry.confidence = confidence;
    entry.source = Source::ake;
    entry.meta["question"] = std::string(question);
    entry.meta["answer"] = std::string(answer);
    return entry;
}

AkeJob KnowledgeEnricher::enrich(KnowledgeBase& kb, const std::vector<std::string>& seeds, std::size_t m,
                                 bool auto_accept, std::string job_id) const {
    AkeJob job;
    job.job_id = std::move(job_id);
    job.seeds = seeds;
    job.m_target = m;
    job.state = JobState::running;

    std::vector<std::string> questions;
    try {
        questions = generate_questions(seeds, m, &job.errors);
    } catch (const PartialGenerationError& e) {
        job.errors.push_back({"generate", "", e.what()});
        questions = e.partial();
    }

    struct Outcome {
        std::optional<KnowledgeEntry> entry;
        std::optional<AkeError> error;
    };
    std::vector<Outcome> outcomes(questions.size());
    parallel_for(questions.size(), config_.parallelism, [&](std::size_t i) {
        const auto& q = questions[i];
        const char* stage = "answer";
        try {
            auto answer = answer_with_confidence(q);
            stage = "transform";
            outcomes[i].entry = qa_pair_to_knowledge(q, answer.answer, answer.confidence);
        } catch (const ValidationError& e) {
            outcomes[i].error = AkeError{"validate", q, e.what()};
        } catch (const Error& e) {
            outcomes[i].error = AkeError{stage, q, e.what()};
        }
    });

    std::set<std::string, std::less<>> job_texts;
    for (auto& outcome : outcomes) {
        if (outcome.error) {
            job.errors.push_back(std::move(*outcome.error));
            continue;
        }
        auto& entry = *outcome.entry;
        if (kb.contains_text(entry.text) || job_texts.contains(entry.text)) {
            ++job.duplicates_skipped;
            continue;
        }
        job_texts.insert(entry.text);
        entry.id = kb.reserve_id();
        entry.meta["job_id"] = job.job_id;
        if (auto_accept) {
            job.produced.push_back({kb.insert_reserved(std::move(entry)), ReviewStatus::auto_accepted});
        } else {
            job.produced.push_back({std::move(entry), ReviewStatus::pending_review});
        }
    }
    job.state = job.produced.empty() && !job.errors.empty() ? JobState::failed : JobState::done;
    return job;
}

const KnowledgeEntry& approve_entry(KnowledgeBase& kb, AkeJob& job, EntryId id, bool verified) {
    auto* item = job.find(id);
    if (item == nullptr) throw NotFoundError("no pending entry " + std::to_string(id) + " in job " + job.job_id);
    if (item->status != ReviewStatus::pending_review) {
        throw ConflictError("entry " + std::to_string(id) + " is already " + std::string(to_string(item->status)));
    }
    auto entry = item->entry;
    if (verified) {
        entry.confidence = 1.0;
        entry.meta["verified"] = true;
    }
    kb.bump_next_id(id + 1);
    const auto& stored = kb.insert_reserved(entry);
    item->status = ReviewStatus::approved;
    item->entry = stored;
    return stored;
}

void reject_entry(AkeJob& job, EntryId id) {
    auto* item = job.find(id);
    if (item == nullptr) throw NotFoundError("no pending entry " + std::to_string(id) + " in job " + job.job_id);
    if (item->status != ReviewStatus::pending_review) {
        throw ConflictError("entry " + std::to_string(id) + " is already " + std::string(to_string(item->status)));
    }
    item->status = ReviewStatus::rejected;
}

}  // namespace l2r
