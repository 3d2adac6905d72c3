// Acceptance suite: one PASS/FAIL/SKIP line per primary criterion.
// `l2r_acceptance --write-golden` rewrites tests/golden/three_questions.jsonl.

#include "l2r/ake.hpp"
#include "l2r/errors.hpp"
#include "l2r/evaluation.hpp"
#include "l2r/util.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

using namespace l2r;
using l2r::testing::qa_reply;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Collects the first failure message of a criterion.
struct Check {
    std::string failure;
    void expect(bool ok, const std::string& what) {
        if (!ok && failure.empty()) failure = what;
    }
    [[nodiscard]] bool ok() const { return failure.empty(); }
};

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point start) {
    return std::chrono::duration<double>(SteadyClock::now() - start).count();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// 1. Hard gate vs brute force over random instances.
Check criterion_1() {
    Check c;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> dist(0.0, 2.0);
    const double confidences[] = {0.0, 0.1, 0.5, 0.8, 0.9, 1.0};
    auto start = SteadyClock::now();
    for (int n = 0; n < 10000; ++n) {
        std::vector<RetrievalHit> hits(rng() % 9);
        for (auto& h : hits) {
            h.distance = rng() % 20 == 0 ? 0.0 : dist(rng);
            h.confidence = rng() % 2 ? confidences[rng() % std::size(confidences)]
                                     : std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        }
        // Occasionally make alpha land exactly on a penalized score.
        double alpha = 0.05 + dist(rng);
        if (!hits.empty() && hits[0].confidence > 0 && rng() % 4 == 0) alpha = hits[0].distance / hits[0].confidence;
        if (rng() % 50 == 0) alpha = kInf;
        if (!(alpha > 0)) alpha = 0.5;

        double best = kInf;
        for (const auto& h : hits) {
            if (h.confidence > 0) best = std::min(best, h.distance / h.confidence);
        }
        bool pass = best < alpha;
        auto got = hard_judge(hits, HardPolicy{alpha});
        c.expect(got.pass == pass, "decision mismatch at instance " + std::to_string(n));
        c.expect(same_bits(got.min_penalized_score, best), "score mismatch at instance " + std::to_string(n));
    }
    double t = seconds_since(start);
    c.expect(t < 1.0, "runtime " + fmt(t) + "s");
    return c;
}

// 2. Retrieval top-k vs exhaustive scan, including permutation ties.
Check criterion_2() {
    Check c;
    static const char* vocab[] = {"river", "stone", "cloud", "apple", "tiger", "copper", "violet", "lantern", "maple",
                                  "harbor", "engine", "falcon", "meadow", "saffron", "glacier", "pepper", "orbit",
                                  "canyon", "willow", "ember", "quartz", "nectar", "thistle", "raven"};
    std::mt19937_64 rng(2);
    auto sentence = [&](std::vector<std::string> words) {
        std::string s;
        for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
        return s + ".";
    };
    auto random_words = [&] {
        std::vector<std::string> w(3 + rng() % 3);
        for (auto& x : w) x = vocab[rng() % std::size(vocab)];
        return w;
    };

    KnowledgeBase kb(HashEmbedder().id(), l2r::testing::fixed_clock);
    std::set<std::string> seen;
    while (kb.size() < 5000) {
        auto words = random_words();
        // Permutations share a vector, producing exact distance ties.
        for (int p = 0; p < 3 && kb.size() < 5000; ++p) {
            std::shuffle(words.begin(), words.end(), rng);
            auto text = sentence(words);
            if (!seen.insert(text).second) continue;
            double conf = rng() % 10 == 0 ? 0.0 : static_cast<double>(1 + rng() % 10) / 10.0;
            kb.upsert_entry(text, conf, Source::manual);
        }
    }
    for (EntryId id = 7; id <= kb.size(); id += 97) kb.remove(id);

    HashEmbedder embedder;
    auto start = SteadyClock::now();
    auto index = build_index(kb, embedder);

    // Oracle: its own embedding pass and distance loop over every live entry.
    HashEmbedder oracle_embedder;
    struct Row {
        EntryId id;
        Vector v;
    };
    std::vector<Row> rows;
    for (const auto& e : kb.entries()) {
        if (e.deleted() || !(e.confidence > 0)) continue;
        rows.push_back({e.id, oracle_embedder.embed(e.text)});
    }
    c.expect(index.size() == rows.size(), "index holds " + std::to_string(index.size()) + " entries, expected " +
                                              std::to_string(rows.size()));

    std::size_t ties = 0;
    for (int q = 0; q < 100; ++q) {
        auto words = random_words();
        if (q % 3 == 0) words = {vocab[rng() % std::size(vocab)], vocab[rng() % std::size(vocab)]};
        auto query = sentence(words);
        auto got = retrieve_top_k(index, embedder, query, 4);

        auto qv = oracle_embedder.embed(query);
        std::vector<std::pair<double, EntryId>> scan;
        for (const auto& r : rows) {
            double sum = 0;
            for (std::size_t i = 0; i < qv.size(); ++i) sum += (qv[i] - r.v[i]) * (qv[i] - r.v[i]);
            scan.emplace_back(std::sqrt(sum), r.id);
        }
        std::sort(scan.begin(), scan.end());
        for (std::size_t i = 1; i < 5; ++i) ties += scan[i].first == scan[i - 1].first;
        c.expect(got.hits.size() == 4, "query " + std::to_string(q) + " returned " + std::to_string(got.hits.size()));
        for (std::size_t i = 0; i < got.hits.size() && i < 4; ++i) {
            c.expect(got.hits[i].entry_id == scan[i].second,
                     "query " + std::to_string(q) + " rank " + std::to_string(i) + ": id " +
                         std::to_string(got.hits[i].entry_id) + " vs oracle " + std::to_string(scan[i].second));
            c.expect(std::abs(got.hits[i].distance - scan[i].first) < 1e-12, "distance mismatch");
        }
    }
    c.expect(ties > 0, "no distance ties near the top-k boundary were exercised");
    double t = seconds_since(start);
    c.expect(t < 10.0, "runtime " + fmt(t) + "s");
    return c;
}

// 3. Gate conjunction, single refusal cause, report accounting.
Check criterion_3() {
    Check c;
    static const char* vocab[] = {"red", "fox", "jumps", "lazy", "dog", "blue", "whale", "sings", "deep", "sea",
                                  "green", "frog", "leaps", "tall", "tree", "gold", "coin", "shines", "dark", "cave"};
    std::mt19937_64 rng(3);
    auto phrase = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + std::string(vocab[rng() % std::size(vocab)]);
        return s;
    };
    std::set<std::pair<bool, bool>> combos;
    for (int run = 0; run < 1000; ++run) {
        KnowledgeBase kb(HashEmbedder().id(), l2r::testing::fixed_clock);
        std::set<std::string> texts;
        for (int i = 0; i < 8; ++i) {
            auto t = phrase(3 + rng() % 3) + ".";
            if (!texts.insert(t).second) continue;
            kb.upsert_entry(t, static_cast<double>(rng() % 11) / 10.0, Source::manual);
        }
        std::vector<DatasetRecord> ds;
        for (int i = 0; i < 5; ++i) {
            DatasetRecord r;
            r.id = "r" + std::to_string(i);
            r.question = phrase(2 + rng() % 4) + " q" + std::to_string(i) + "?";
            r.choices = {"yes", "no"};
            r.gold = {rng() % 2};
            ds.push_back(r);
        }
        auto salt = std::to_string(rng());
        // Soft bit and answer letter are a pure function of the prompt.
        MockProvider mock({}, [salt](const std::string& prompt) -> std::optional<std::string> {
            auto h = fnv1a64(salt + prompt);
            auto ids = l2r::testing::ids_in_prompt(prompt);
            std::string letter = h & 2 ? "A" : "B";
            if (h % 3 == 0 || ids.empty()) return qa_reply(false, {}, letter);
            return qa_reply(true, {ids.front()}, letter);
        });
        l2r::testing::Rig rig(kb);
        PipelineConfig config;
        config.refusal.alpha = 0.3 + static_cast<double>(rng() % 120) / 100.0;
        auto pipeline = rig.pipeline(mock, config);

        std::size_t answered = 0, hard = 0, soft = 0;
        for (const auto& r : ds) {
            auto forced = pipeline.forced_answer(r.as_question());
            const auto& fj = forced.judgment;
            combos.insert({fj.i_soft, fj.i_hard});
            c.expect(fj.i_final == (fj.i_soft && fj.i_hard), "forced i_final != i_soft AND i_hard");

            auto before = mock.calls();
            auto resp = pipeline.answer_question(r.as_question());
            const auto& j = resp.judgment;
            auto calls = mock.calls() - before;
            c.expect(j.i_final == (j.i_soft && j.i_hard), "i_final != i_soft AND i_hard");
            c.expect(j.i_hard == fj.i_hard && same_bits(j.min_penalized_score, fj.min_penalized_score),
                     "forced and normal hard judgments differ");
            c.expect((resp.status == Status::answered) == j.i_final, "status disagrees with i_final");
            if (resp.status == Status::answered) {
                ++answered;
                c.expect(!resp.refusal_cause, "answered response carries a refusal cause");
                c.expect(j.i_soft == fj.i_soft, "soft bit differs from forced pass");
            } else {
                c.expect(resp.refusal_cause.has_value(), "refusal without a cause");
                bool is_hard = resp.refusal_cause == RefusalCause::hard;
                c.expect(is_hard == !j.i_hard, "cause disagrees with hard bit");
                (is_hard ? hard : soft)++;
                if (is_hard) c.expect(calls == 0, "hard refusal made a provider call");
            }
            if (j.i_hard) c.expect(calls == 1, "gate pass made " + std::to_string(calls) + " calls");
        }
        auto report = run_eval(ds, pipeline);
        c.expect(report.answered + report.refusals_hard + report.refusals_soft == report.total,
                 "answered+hard+soft != total");
        c.expect(report.answered == answered && report.refusals_hard == hard && report.refusals_soft == soft,
                 "report tallies differ from per-question runs");
        for (const auto& o : report.per_question) {
            c.expect((o.status == Status::answered) != o.cause.has_value(), "outcome cause attribution");
        }
    }
    c.expect(combos.size() == 4, "only " + std::to_string(combos.size()) + " of 4 gate combinations exercised");
    return c;
}

// 4. Alpha sweep on a 200-question forced pass.
Check criterion_4() {
    Check c;
    auto ds = l2r::testing::synthetic_dataset(200, 44);
    KnowledgeBase kb(HashEmbedder().id(), l2r::testing::fixed_clock);
    std::mt19937_64 rng(4);
    for (std::size_t i = 0; i < ds.size(); i += 2) {
        kb.upsert_entry(ds[i].gold_knowledge->front(), static_cast<double>(5 + rng() % 6) / 10.0, Source::manual);
    }
    l2r::testing::Rig rig(kb);
    // Always soft-passes; right on roughly two thirds of the questions.
    auto always_yes = [&](const std::string& prompt) -> std::optional<std::string> {
        auto asked = l2r::testing::question_in_prompt(prompt);
        auto ids = l2r::testing::ids_in_prompt(prompt);
        for (const auto& r : ds) {
            if (!asked || asked->rfind(r.question, 0) != 0) continue;
            auto pick = fnv1a64(r.id) % 3 ? r.gold.front() : (r.gold.front() + 1) % 3;
            return qa_reply(true, {ids.front()}, std::string(1, option_letter(pick)));
        }
        return std::nullopt;
    };
    // Soft-passes only when the question's own fact was retrieved.
    l2r::testing::OracleAgent oracle{ds};

    std::vector<double> alphas{0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0, 1.2, 1.5, 2.0, 3.0, kInf};
    for (int variant = 0; variant < 2; ++variant) {
        MockProvider mock({}, variant == 0 ? MockProvider::Responder(always_yes) : MockProvider::Responder(oracle));
        auto pipeline = rig.pipeline(mock);
        auto cache = record_forced_pass(ds, pipeline);
        c.expect(cache.size() == 200, "forced pass size");
        auto calls = mock.calls();
        // Replay from the serialized form, as the CLI does.
        auto replay = parse_forced_cache(forced_cache_jsonl(cache));
        auto pts = sweep_alpha(replay, alphas);
        c.expect(mock.calls() == calls, "sweep replay issued provider calls");

        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto& p = pts[i];
            if (i) c.expect(p.answered >= pts[i - 1].answered, "answered decreases at alpha " + fmt(p.alpha));
            c.expect(p.answered + p.refused == 200, "answered+refused != 200");
            std::size_t answered = 0, correct = 0;
            for (const auto& r : cache) {
                if (!r.error && r.min_score < p.alpha && r.i_soft) {
                    ++answered;
                    correct += r.score.correct_units;
                }
            }
            c.expect(p.answered == answered && p.correct_units == correct, "oracle mismatch at alpha " + fmt(p.alpha));
            // mc1: units are questions, so the identity holds on counts.
            c.expect(p.answered_units == p.answered && p.total_units == 200, "unit counts");
            c.expect(std::llround(p.precision * static_cast<double>(p.answered)) ==
                         std::llround(p.recall * static_cast<double>(p.total_units)),
                     "precision*answered != recall*total at alpha " + fmt(p.alpha));
            c.expect(p.answered == 0 || std::llround(p.precision * static_cast<double>(p.answered)) ==
                                            static_cast<long long>(p.correct_units),
                     "precision*answered != correct");
        }
        c.expect(pts.front().answered == 0, "alpha 0 answered " + std::to_string(pts.front().answered));
        if (variant == 0) {
            c.expect(pts.back().answered == 200, "alpha inf answered " + std::to_string(pts.back().answered));
        } else {
            c.expect(pts.back().answered == 100 && pts.back().precision == 1.0, "oracle variant at alpha inf");
        }
        // The gated run agrees with the replay at the configured alpha.
        auto at = std::find(alphas.begin(), alphas.end(), kDefaultAlpha) - alphas.begin();
        auto before = mock.calls();
        auto gated = run_eval(ds, pipeline);
        c.expect(gated.answered == pts[at].answered, "gated run disagrees with replay at 0.75");
        c.expect(mock.calls() - before == 200 - gated.refusals_hard, "gated run call count");
    }
    return c;
}

// 5. Golden JSONL for the three example questions.
const char* kGoldenQuestions[][2] = {
    {"obama-born-us", "Was Barack Obama born in the United States?"},
    {"tallest-mountain", "What is the tallest mountain in the world?"},
    {"obama-birth-year", "Which year was Barack Obama born in the United States?"},
};

std::string golden_path() { return std::string(L2R_SOURCE_DIR) + "/tests/golden/three_questions.jsonl"; }

std::string golden_run(std::vector<std::uint64_t>* calls_per_question = nullptr) {
    auto kb = l2r::testing::sample_kb();
    l2r::testing::Rig rig(kb);
    MockProvider mock(MockProvider::load_script(std::string(L2R_SOURCE_DIR) + "/samples/mock_script.json"));
    auto pipeline = rig.pipeline(mock);
    std::string out;
    for (const auto& [id, text] : kGoldenQuestions) {
        auto before = mock.calls();
        out += to_json(pipeline.answer_question({text, {}, Task::open}), id).dump() + "\n";
        if (calls_per_question) calls_per_question->push_back(mock.calls() - before);
    }
    return out;
}

Check criterion_5() {
    Check c;
    std::vector<std::uint64_t> calls;
    auto first = golden_run(&calls);
    auto second = golden_run();
    c.expect(first == second, "two runs differ");
    std::string expected;
    try {
        expected = read_file(golden_path());
    } catch (const std::exception& e) {
        c.expect(false, e.what());
    }
    c.expect(first == expected, "output differs from " + golden_path());
    auto lines = split_lines(first);
    c.expect(lines.size() == 3, "expected three records");
    if (lines.size() == 3) {
        auto a = nlohmann::json::parse(lines[0]);
        auto h = nlohmann::json::parse(lines[1]);
        auto s = nlohmann::json::parse(lines[2]);
        c.expect(a["status"] == "answered" && a["evidence"][0]["id"] == 2, "first question not answered from [2]");
        c.expect(h["refusal_cause"] == "hard" && calls[1] == 0, "second question not hard-refused without a call");
        c.expect(s["refusal_cause"] == "soft" && calls[2] == 1, "third question not soft-refused");
    }
    return c;
}

// 6. Gold-ratio experiment with an oracle agent.
Check criterion_6() {
    Check c;
    auto start = SteadyClock::now();
    auto ds = l2r::testing::synthetic_dataset(100, 6);
    HashEmbedder embedder;
    PromptLibrary prompts;
    MockProvider mock({}, l2r::testing::OracleAgent{ds});
    std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0};
    auto rows = gold_ratio_experiment(ds, ratios, embedder, mock, prompts, {});
    c.expect(rows.size() == ratios.size(), "row count");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i) c.expect(rows[i].answered > rows[i - 1].answered, "answered not strictly increasing at " + fmt(ratios[i]));
        if (rows[i].answered) c.expect(rows[i].accuracy == 1.0, "accuracy below 100% at " + fmt(ratios[i]));
    }
    if (!rows.empty()) c.expect(rows[0].answered == 0 && rows[0].kb_entries == 0, "ratio 0 answered something");
    double t = seconds_since(start);
    c.expect(t < 30.0, "runtime " + fmt(t) + "s");
    return c;
}

// 7. AKE integrity over a 50-question scripted enrichment.
Check criterion_7() {
    Check c;
    auto prompts = l2r::testing::ake_prompts();
    auto kb = l2r::testing::sample_kb();
    std::vector<KnowledgeEntry> before(kb.entries().begin(), kb.entries().end());
    std::vector<std::string> seeds;
    for (int i = 0; i < 10; ++i) seeds.push_back("What about topic " + std::to_string(i) + "?");

    MockProvider first({}, l2r::testing::AkeModel{});
    auto job = KnowledgeEnricher(first, prompts, {5, 4}).enrich(kb, seeds, 50, true, "ake-acceptance");
    c.expect(job.state == JobState::done, "job not done");
    c.expect(job.produced.size() == 50, "produced " + std::to_string(job.produced.size()) + " entries");
    c.expect(job.errors.empty(), "job recorded errors");

    std::set<std::string> texts;
    for (const auto& e : kb.entries()) c.expect(texts.insert(e.text).second, "duplicate text: " + e.text);
    for (std::size_t i = 0; i < before.size(); ++i) c.expect(kb.entries()[i] == before[i], "pre-existing entry changed");
    for (const auto& item : job.produced) {
        const auto& e = item.entry;
        try {
            validate_single_fact(e.text);
        } catch (const std::exception& ex) {
            c.expect(false, ex.what());
        }
        // Confidence must be the value the script printed, bit for bit.
        auto q = e.meta["question"].get<std::string>();
        auto scripted = std::strtod(format_decimal(l2r::testing::AkeModel::confidence_for(q)).c_str(), nullptr);
        c.expect(same_bits(e.confidence, scripted), "confidence of entry " + std::to_string(e.id) + " altered");
        c.expect(kb.find(e.id) && *kb.find(e.id) == e, "produced entry missing from KB");
    }

    auto size = kb.size();
    MockProvider second({}, l2r::testing::AkeModel{});
    auto again = KnowledgeEnricher(second, prompts, {5, 4}).enrich(kb, seeds, 50, true, "ake-acceptance-2");
    c.expect(again.produced.empty() && kb.size() == size, "rerun added entries");
    return c;
}

// 8. Metric arithmetic on hand-checked values.
Check criterion_8() {
    Check c;
    auto outcome = [](Status s, std::optional<RefusalCause> cause, bool correct) {
        QuestionOutcome o;
        o.status = s;
        o.cause = cause;
        o.score = {correct ? 1u : 0u, 1u, correct, true};
        return o;
    };
    std::vector<QuestionOutcome> o;
    for (int i = 0; i < 6; ++i) o.push_back(outcome(Status::answered, std::nullopt, i < 4));
    for (int i = 0; i < 3; ++i) o.push_back(outcome(Status::refused, RefusalCause::hard, false));
    o.push_back(outcome(Status::refused, RefusalCause::soft, false));
    auto rep = summarize(o, 0.75, 4);
    c.expect(rep.answered == 6 && rep.correct == 4, "count/correct");
    c.expect(std::abs(rep.accuracy * 100 - 66.7) <= 0.05, "accuracy " + fmt(rep.accuracy * 100));
    c.expect(rep.refusals_hard == 3 && rep.refusals_soft == 1, "refusal split");
    // Ten forced outcomes with seven wrong overall (plain arithmetic input);
    // only the refused four, indices 6-9, enter the rate.
    const bool forced_wrong[10] = {false, false, true, true, true, true, true, true, true, false};
    std::size_t wrong_refused = 0, wrong_all = 0;
    for (int i = 0; i < 10; ++i) {
        wrong_all += forced_wrong[i];
        if (i >= 6) wrong_refused += forced_wrong[i];
    }
    c.expect(wrong_all == 7, "fixture");
    c.expect(success_rate(4, wrong_refused).rate == 0.75, "success rate on refused subset");
    c.expect(success_rate(10, wrong_all).rate == 0.7, "whole-set rate arithmetic");
    c.expect(!success_rate(0, 0).rate, "rate defined with nothing refused");

    // Same shape through the pipeline: ids 0-6 have a fact (hard pass),
    // 0-3 answered right, 4-5 wrong, 6 soft-refused; 7-9 hard-refused.
    auto ds = l2r::testing::synthetic_dataset(10, 8);
    KnowledgeBase kb(HashEmbedder().id(), l2r::testing::fixed_clock);
    for (std::size_t i = 0; i < 7; ++i) kb.upsert_entry(ds[i].gold_knowledge->front(), 1.0, Source::manual, true);
    l2r::testing::Rig rig(kb);
    MockProvider mock({}, [&](const std::string& prompt) -> std::optional<std::string> {
        auto asked = l2r::testing::question_in_prompt(prompt);
        auto ids = l2r::testing::ids_in_prompt(prompt);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (!asked || asked->rfind(ds[i].question, 0) != 0) continue;
            auto gold = ds[i].gold.front();
            bool right = i <= 3 || i == 9;
            auto letter = std::string(1, option_letter(right ? gold : (gold + 1) % 3));
            if (i == 6) return qa_reply(false, {}, letter);
            return qa_reply(true, {ids.front()}, letter);
        }
        return std::nullopt;
    });
    auto pipeline = rig.pipeline(mock);
    auto report = run_eval(ds, pipeline);
    c.expect(report.answered == 6 && report.correct == 4, "pipeline count/correct " + std::to_string(report.answered) +
                                                             "/" + std::to_string(report.correct));
    c.expect(report.refusals_hard == 3 && report.refusals_soft == 1, "pipeline refusal split");
    auto s = refusal_success_rate(report, ds, pipeline);
    c.expect(s.refused == 4 && s.would_be_incorrect == 3 && report.success_rate == 0.75,
             "pipeline success rate " + (s.rate ? fmt(*s.rate) : std::string("undefined")));
    return c;
}

// 9. Live provider round trip; needs L2R_LIVE_ENDPOINT, L2R_LIVE_MODEL and the API key env.
std::optional<Check> criterion_9() {
    const char* endpoint = std::getenv("L2R_LIVE_ENDPOINT");
    const char* model = std::getenv("L2R_LIVE_MODEL");
    if (!endpoint || !model || !*endpoint || !*model) return std::nullopt;
    Check c;
    ProviderConfig config;
    config.endpoint = endpoint;
    config.model = model;
    try {
        OpenAIProvider provider(config);
        auto kb = l2r::testing::sample_kb();
        l2r::testing::Rig rig(kb);
        auto pipeline = rig.pipeline(provider);
        auto a = pipeline.answer_question({"Was Barack Obama born in the United States?", {}, Task::open});
        auto r = pipeline.answer_question({"What is the tallest mountain in the world?", {}, Task::open});
        c.expect(a.status == Status::answered, "known question was refused");
        c.expect(r.status == Status::refused, "unknown question was answered");
        c.expect(provider.calls() >= 1, "no live call made");
    } catch (const std::exception& e) {
        c.expect(false, e.what());
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1 && std::string(argv[1]) == "--write-golden") {
        std::filesystem::create_directories(std::filesystem::path(golden_path()).parent_path());
        write_file(golden_path(), golden_run());
        std::cout << "wrote " << golden_path() << "\n";
        return 0;
    }

    struct Criterion {
        int number;
        const char* title;
        std::function<std::optional<Check>()> run;
    };
    std::vector<Criterion> criteria{
        {1, "hard-gate oracle equivalence", [] { return std::optional(criterion_1()); }},
        {2, "retrieval exactness", [] { return std::optional(criterion_2()); }},
        {3, "conjunction and attribution", [] { return std::optional(criterion_3()); }},
        {4, "sweep correctness", [] { return std::optional(criterion_4()); }},
        {5, "deterministic end-to-end golden", [] { return std::optional(criterion_5()); }},
        {6, "gold-ratio experiment", [] { return std::optional(criterion_6()); }},
        {7, "AKE integrity", [] { return std::optional(criterion_7()); }},
        {8, "metric arithmetic golden", [] { return std::optional(criterion_8()); }},
        {9, "live provider smoke test", criterion_9},
    };

    auto start = SteadyClock::now();
    int failed = 0;
    for (const auto& cr : criteria) {
        std::optional<Check> result;
        try {
            result = cr.run();
        } catch (const std::exception& e) {
            result = Check{std::string("exception: ") + e.what()};
        }
        auto label = std::string("criterion ") + std::to_string(cr.number) + ": " + cr.title;
        if (!result) {
            std::cout << "SKIP " << label << " (set L2R_LIVE_ENDPOINT and L2R_LIVE_MODEL)\n";
        } else if (result->ok()) {
            std::cout << "PASS " << label << "\n";
        } else {
            ++failed;
            std::cout << "FAIL " << label << " -- " << result->failure << "\n";
        }
    }
    double t = seconds_since(start);
    std::cout << "total " << fmt(t) << "s\n";
    if (t >= 60.0) {
        std::cout << "FAIL total runtime exceeds 60s\n";
        ++failed;
    }
    return failed ? 1 : 0;
}
