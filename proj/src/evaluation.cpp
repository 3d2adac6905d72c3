#include "l2r/evaluation.hpp"

#include "l2r/errors.hpp"
#include "l2r/parallel.hpp"
#include "l2r/util.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

namespace l2r {

namespace {

nlohmann::ordered_json score_json(double score) {
    if (std::isinf(score)) return nullptr;
    return score;
}

double score_from_json(const nlohmann::json& value) {
    return value.is_null() ? kNoEvidenceScore : value.get<double>();
}

DatasetRecord record_from_json(const nlohmann::json& j, std::size_t line) {
    auto fail = [line](const std::string& what) { throw SchemaError(what, line); };
    if (!j.is_object()) fail("dataset record must be a JSON object");
    DatasetRecord r;

    auto get_string = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) fail(std::string("'") + key + "' must be a string");
        return it->get<std::string>();
    };
    r.id = get_string("id");
    auto task = task_from_string(get_string("task"));
    if (!task || *task == Task::open) fail("'task' must be \"mc1\" or \"mc2\"");
    r.task = *task;
    r.question = get_string("question");
    if (trim(r.question).empty()) fail("'question' is empty");

    auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array()) fail("'choices' must be an array of strings");
    for (const auto& c : *choices) {
        if (!c.is_string()) fail("'choices' must be an array of strings");
        r.choices.push_back(c.get<std::string>());
    }
    if (r.choices.size() < 2) fail("at least 2 choices are required");
    if (r.choices.size() > 26) fail("at most 26 choices are supported");

    auto gold = j.find("gold");
    if (gold == j.end() || !gold->is_array()) fail("'gold' must be an array of indices");
    std::set<std::size_t> seen;
    for (const auto& g : *gold) {
        if (!g.is_number_unsigned()) fail("'gold' must hold non-negative integers");
        auto index = g.get<std::size_t>();
        if (index >= r.choices.size()) fail("gold index " + std::to_string(index) + " out of range");
        if (!seen.insert(index).second) fail("duplicate gold index " + std::to_string(index));
        r.gold.push_back(index);
    }
    if (r.task == Task::mc1 && r.gold.size() != 1) fail("mc1 records need exactly one gold index");
    if (r.gold.empty()) fail("'gold' is empty");

    if (auto gk = j.find("gold_knowledge"); gk != j.end() && !gk->is_null()) {
        if (!gk->is_array()) fail("'gold_knowledge' must be an array of strings");
        std::vector<std::string> facts;
        for (const auto& f : *gk) {
            if (!f.is_string()) fail("'gold_knowledge' must be an array of strings");
            facts.push_back(f.get<std::string>());
        }
        r.gold_knowledge = std::move(facts);
    }
    if (auto cat = j.find("category"); cat != j.end() && !cat->is_null()) {
        if (!cat->is_string()) fail("'category' must be a string");
        r.category = cat->get<std::string>();
    }
    return r;
}

QuestionOutcome outcome_from(const DatasetRecord& record, const QAResponse& response) {
    QuestionOutcome o;
    o.id = record.id;
    o.task = record.task;
    o.status = response.status;
    o.cause = response.refusal_cause;
    o.i_soft = response.judgment.i_soft;
    o.i_hard = response.judgment.i_hard;
    o.min_score = response.judgment.min_penalized_score;
    o.answer = response.answer;
    o.score = score_answer(record, response.answer);
    if (response.status != Status::answered) o.score.correct_units = 0;
    return o;
}

QuestionOutcome error_outcome(const DatasetRecord& record, const std::string& message) {
    QuestionOutcome o;
    o.id = record.id;
    o.task = record.task;
    o.status = Status::refused;
    o.cause = RefusalCause::soft;
    o.error = true;
    o.error_message = message;
    o.score.total_units = record.task == Task::mc1 ? 1 : record.choices.size();
    return o;
}

std::size_t units_of(const DatasetRecord& record) { return record.task == Task::mc1 ? 1 : record.choices.size(); }

}  // namespace

std::vector<DatasetRecord> parse_dataset(std::string_view contents) {
    std::vector<DatasetRecord> out;
    std::set<std::string, std::less<>> ids;
    auto lines = split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), i + 1);
        }
        auto record = record_from_json(j, i + 1);
        if (!ids.insert(record.id).second) throw SchemaError("duplicate record id '" + record.id + "'", i + 1);
        out.push_back(std::move(record));
    }
    return out;
}

std::vector<DatasetRecord> load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

Score score_answer(const DatasetRecord& record, std::string_view answer) {
    Score s;
    if (record.task == Task::mc1) {
        s.total_units = 1;
        auto choice = parse_mc1_choice(answer, record.choices.size());
        s.parsed = choice.has_value();
        s.question_correct = choice && *choice == record.gold.front();
        s.correct_units = s.question_correct ? 1 : 0;
        return s;
    }
    s.total_units = record.choices.size();
    auto labels = parse_mc2_labels(answer, record.choices.size());
    s.parsed = std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
    for (std::size_t i = 0; i < labels.size(); ++i) {
        bool truth = std::find(record.gold.begin(), record.gold.end(), i) != record.gold.end();
        if (labels[i] && *labels[i] == truth) ++s.correct_units;
    }
    s.question_correct = s.correct_units == s.total_units;
    return s;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json out;
    out["total"] = report.total;
    out["answered"] = report.answered;
    out["correct"] = report.correct;
    out["answered_units"] = report.answered_units;
    out["accuracy"] = report.accuracy;
    out["accuracy_defined"] = report.accuracy_defined;
    out["refusals_hard"] = report.refusals_hard;
    out["refusals_soft"] = report.refusals_soft;
    out["errors"] = report.errors;
    out["success_rate"] = report.success_rate ? nlohmann::ordered_json(*report.success_rate) : nlohmann::ordered_json(nullptr);
    out["alpha"] = report.alpha;
    out["k"] = report.k;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& q : report.per_question) {
        nlohmann::ordered_json row;
        row["id"] = q.id;
        row["task"] = to_string(q.task);
        row["status"] = to_string(q.status);
        row["refusal_cause"] = q.cause ? nlohmann::ordered_json(to_string(*q.cause)) : nlohmann::ordered_json(nullptr);
        row["error"] = q.error;
        if (q.error) row["error_message"] = q.error_message;
        row["i_soft"] = q.i_soft;
        row["i_hard"] = q.i_hard;
        row["min_score"] = score_json(q.min_score);
        row["answer"] = q.answer;
        row["correct_units"] = q.score.correct_units;
        row["total_units"] = q.score.total_units;
        row["correct"] = q.status == Status::answered && q.score.question_correct;
        rows.push_back(std::move(row));
    }
    out["per_question"] = std::move(rows);
    return out;
}

EvalReport summarize(std::vector<QuestionOutcome> outcomes, double alpha, std::size_t k) {
    EvalReport report;
    report.alpha = alpha;
    report.k = k;
    report.total = outcomes.size();
    for (const auto& o : outcomes) {
        if (o.status == Status::answered) {
            ++report.answered;
            report.correct += o.score.correct_units;
            report.answered_units += o.score.total_units;
        } else if (o.cause == RefusalCause::hard) {
            ++report.refusals_hard;
        } else {
            ++report.refusals_soft;
            if (o.error) ++report.errors;
        }
    }
    report.accuracy_defined = report.answered_units > 0;
    report.accuracy = report.accuracy_defined
                          ? static_cast<double>(report.correct) / static_cast<double>(report.answered_units)
                          : 0.0;
    report.per_question = std::move(outcomes);
    return report;
}

EvalReport run_eval(const std::vector<DatasetRecord>& dataset, const Pipeline& pipeline, const EvalOptions& options) {
    std::vector<QuestionOutcome> outcomes(dataset.size());
    parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
        const auto& record = dataset[i];
        try {
            outcomes[i] = outcome_from(record, pipeline.answer_question(record.as_question(), options.overrides));
        } catch (const Error& e) {
            outcomes[i] = error_outcome(record, e.what());
        }
    });
    return summarize(std::move(outcomes), options.overrides.alpha.value_or(pipeline.config().refusal.alpha),
                     options.overrides.k.value_or(pipeline.config().k));
}

SuccessRate success_rate(std::size_t refused, std::size_t would_be_incorrect) {
    SuccessRate out{refused, would_be_incorrect, std::nullopt};
    if (refused > 0) out.rate = static_cast<double>(would_be_incorrect) / static_cast<double>(refused);
    return out;
}

SuccessRate refusal_success_rate(EvalReport& report, const std::vector<DatasetRecord>& dataset,
                                 const Pipeline& pipeline, const EvalOptions& options) {
    std::vector<const DatasetRecord*> refused;
    for (std::size_t i = 0; i < report.per_question.size() && i < dataset.size(); ++i) {
        if (report.per_question[i].status == Status::refused) refused.push_back(&dataset[i]);
    }
    std::vector<char> incorrect(refused.size(), 0);
    parallel_for(refused.size(), options.parallelism, [&](std::size_t i) {
        try {
            auto forced = pipeline.forced_answer(refused[i]->as_question(), options.overrides);
            incorrect[i] = score_answer(*refused[i], forced.answer).question_correct ? 0 : 1;
        } catch (const Error&) {
            incorrect[i] = 1;
        }
    });
    auto wrong = static_cast<std::size_t>(std::count(incorrect.begin(), incorrect.end(), 1));
    auto rate = success_rate(refused.size(), wrong);
    report.success_rate = rate.rate;
    return rate;
}

ForcedCache record_forced_pass(const std::vector<DatasetRecord>& dataset, const Pipeline& pipeline,
                               const EvalOptions& options) {
    ForcedCache cache(dataset.size());
    parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
        const auto& record = dataset[i];
        auto& out = cache[i];
        out.id = record.id;
        try {
            auto response = pipeline.forced_answer(record.as_question(), options.overrides);
            out.min_score = response.judgment.min_penalized_score;
            out.i_soft = response.judgment.i_soft;
            out.score = score_answer(record, response.answer);
        } catch (const Error&) {
            out.error = true;
            out.score.total_units = units_of(record);
        }
    });
    return cache;
}

std::string forced_cache_jsonl(const ForcedCache& cache) {
    std::string out;
    for (const auto& r : cache) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["min_score"] = score_json(r.min_score);
        j["i_soft"] = r.i_soft;
        j["error"] = r.error;
        j["correct_units"] = r.score.correct_units;
        j["total_units"] = r.score.total_units;
        j["question_correct"] = r.score.question_correct;
        out += j.dump() + "\n";
    }
    return out;
}

ForcedCache parse_forced_cache(std::string_view contents) {
    ForcedCache cache;
    auto lines = split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            auto j = nlohmann::json::parse(lines[i]);
            ForcedRecord r;
            r.id = j.at("id").get<std::string>();
            r.min_score = score_from_json(j.at("min_score"));
            r.i_soft = j.at("i_soft").get<bool>();
            r.error = j.at("error").get<bool>();
            r.score.correct_units = j.at("correct_units").get<std::size_t>();
            r.score.total_units = j.at("total_units").get<std::size_t>();
            r.score.question_correct = j.at("question_correct").get<bool>();
            r.score.parsed = true;
            cache.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed forced-pass record: ") + e.what(), i + 1);
        }
    }
    return cache;
}

std::vector<SweepPoint> sweep_alpha(const ForcedCache& cache, std::span<const double> alphas) {
    if (cache.empty()) throw MissingCache("no forced-mode pass recorded; run one before sweeping");
    std::vector<SweepPoint> points;
    points.reserve(alphas.size());
    for (double alpha : alphas) {
        SweepPoint p;
        p.alpha = alpha;
        for (const auto& r : cache) {
            p.total_units += r.score.total_units;
            if (!r.error && r.i_soft && r.min_score < alpha) {
                ++p.answered;
                p.answered_units += r.score.total_units;
                p.correct_units += r.score.correct_units;
            } else {
                ++p.refused;
            }
        }
        p.accuracy = p.answered_units ? static_cast<double>(p.correct_units) / static_cast<double>(p.answered_units) : 0.0;
        p.precision = p.accuracy;
        p.recall = p.total_units ? static_cast<double>(p.correct_units) / static_cast<double>(p.total_units) : 0.0;
        points.push_back(p);
    }
    return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string out = "alpha,answered,refused,accuracy,precision,recall\n";
    for (const auto& p : points) {
        out += format_decimal(p.alpha) + "," + std::to_string(p.answered) + "," + std::to_string(p.refused) + "," +
               format_decimal(p.accuracy) + "," + format_decimal(p.precision) + "," + format_decimal(p.recall) + "\n";
    }
    return out;
}

std::vector<RatioRow> gold_ratio_experiment(const std::vector<DatasetRecord>& dataset, std::span<const double> ratios,
                                            Embedder& embedder, ChatProvider& provider, const PromptLibrary& prompts,
                                            const PipelineConfig& config, const EvalOptions& options) {
    for (const auto& r : dataset) {
        if (!r.gold_knowledge || r.gold_knowledge->empty()) {
            throw MissingGoldKnowledge("record '" + r.id + "' has no gold_knowledge");
        }
    }
    for (double ratio : ratios) {
        if (!(ratio >= 0.0 && ratio <= 1.0)) throw RangeError("ratio " + format_decimal(ratio) + " outside [0, 1]");
    }

    EmbeddingCache cache;
    std::vector<RatioRow> rows;
    for (double ratio : ratios) {
        // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
        auto prefix = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(dataset.size()) + 1e-9));
        KnowledgeBase kb(embedder.id());
        for (std::size_t i = 0; i < prefix; ++i) {
            for (const auto& fact : *dataset[i].gold_knowledge) kb.upsert_entry(fact, 1.0, Source::manual, true);
        }
        auto index = std::make_shared<const VectorIndex>(build_index(kb, embedder, &cache));
        Pipeline pipeline(index, embedder, provider, prompts, config);
        auto report = run_eval(dataset, pipeline, options);
        rows.push_back({ratio, kb.size(), report.answered, report.accuracy, report.accuracy_defined});
    }
    return rows;
}

std::string ratio_csv(const std::vector<RatioRow>& rows) {
    std::string out = "ratio,kb_entries,answered,accuracy\n";
    for (const auto& r : rows) {
        out += format_decimal(r.ratio) + "," + std::to_string(r.kb_entries) + "," + std::to_string(r.answered) + "," +
               format_decimal(r.accuracy) + "\n";
    }
    return out;
}

}  // namespace l2r
