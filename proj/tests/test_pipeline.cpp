#include "l2r/errors.hpp"
#include "l2r/pipeline.hpp"
#include "l2r/refusal.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace l2r;
using l2r::testing::qa_reply;
using l2r::testing::Rig;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const Question kObama{"Was Barack Obama born in the United States?", {}, Task::open};
const Question kMountain{"What is the tallest mountain in the world?", {}, Task::open};

}  // namespace

TEST(HardGate, MinOverEligibleHits) {
    std::vector<RetrievalHit> hits{{1, 0.5, 0.3, ""}, {2, 1.0, 0.5, ""}, {3, 0.0, 0.0, ""}};
    auto d = hard_judge(hits, {0.75});
    EXPECT_DOUBLE_EQ(d.min_penalized_score, 0.5);
    EXPECT_TRUE(d.pass);
    EXPECT_FALSE(hard_judge(hits, {0.5}).pass);  // strict
    EXPECT_TRUE(hard_judge(hits, {0.5000001}).pass);
}

TEST(HardGate, NoEligibleHitIsInfinite) {
    std::vector<RetrievalHit> zero{{1, 0.0, 0.0, ""}};
    EXPECT_EQ(hard_judge(zero, {0.75}).min_penalized_score, kInf);
    EXPECT_FALSE(hard_judge(zero, {1e300}).pass);
    EXPECT_FALSE(hard_judge(std::vector<RetrievalHit>{}, {kInf}).pass);
}

TEST(HardGate, AlphaMustBePositive) {
    EXPECT_THROW((HardPolicy{0.0}.validate()), ConfigError);
    EXPECT_THROW((HardPolicy{-1.0}.validate()), ConfigError);
    EXPECT_THROW((HardPolicy{std::nan("")}.validate()), ConfigError);
    EXPECT_NO_THROW((HardPolicy{kInf}.validate()));
}

TEST(HardGate, LowConfidencePenalizes) {
    // Same distance: lower confidence gives a larger score.
    std::vector<RetrievalHit> a{{1, 1.0, 0.6, ""}};
    std::vector<RetrievalHit> b{{1, 0.5, 0.6, ""}};
    EXPECT_TRUE(hard_judge(a, {0.75}).pass);
    EXPECT_FALSE(hard_judge(b, {0.75}).pass);
}

TEST(Combine, TruthTable) {
    EXPECT_TRUE(combine(true, true));
    EXPECT_FALSE(combine(true, false));
    EXPECT_FALSE(combine(false, true));
    EXPECT_FALSE(combine(false, false));
}

TEST(Pipeline, AnsweredWithCitedEvidence) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {qa_reply(true, {2}, "Yes.", "Entry 2 says so.")}});
    auto r = rig.pipeline(mock).answer_question(kObama);
    EXPECT_EQ(r.status, Status::answered);
    EXPECT_FALSE(r.refusal_cause);
    ASSERT_EQ(r.evidence.size(), 1u);
    EXPECT_EQ(r.evidence[0].id, 2u);
    EXPECT_EQ(r.evidence[0].distance, 0.0);
    EXPECT_EQ(r.reasoning, "Entry 2 says so.");
    EXPECT_EQ(r.answer, "Yes.");
    EXPECT_EQ(r.judgment, (Judgment{true, true, true, 0.0, 0.75}));
    EXPECT_EQ(r.retrieval.hits.size(), 4u);
    EXPECT_EQ(r.audit_id, 1u);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(Pipeline, HardRefusalMakesNoCall) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock;  // any call would throw
    auto r = rig.pipeline(mock).answer_question(kMountain);
    EXPECT_EQ(r.status, Status::refused);
    EXPECT_EQ(r.refusal_cause, RefusalCause::hard);
    EXPECT_FALSE(r.judgment.i_hard);
    EXPECT_FALSE(r.judgment.i_soft);
    EXPECT_FALSE(r.judgment.i_final);
    EXPECT_GT(r.judgment.min_penalized_score, 0.75);
    EXPECT_EQ(r.audit_id, 0u);
    EXPECT_EQ(mock.calls(), 0u);
}

TEST(Pipeline, SoftRefusal) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {"ANSWERABLE: NO"}});
    auto r = rig.pipeline(mock).answer_question(kObama);
    EXPECT_EQ(r.status, Status::refused);
    EXPECT_EQ(r.refusal_cause, RefusalCause::soft);
    EXPECT_TRUE(r.judgment.i_hard);
    EXPECT_FALSE(r.judgment.i_soft);
    EXPECT_TRUE(r.evidence.empty());
    EXPECT_TRUE(r.answer.empty());
}

TEST(Pipeline, AllFourGateCombinations) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    for (bool soft : {false, true}) {
        for (const auto* q : {&kObama, &kMountain}) {
            bool hard = q == &kObama;
            MockProvider mock({{}, {}, {qa_reply(soft, {}, "x")}});
            auto r = rig.pipeline(mock).answer_question(*q);
            EXPECT_EQ(r.status == Status::answered, soft && hard);
            EXPECT_EQ(r.judgment.i_final, soft && hard);
            EXPECT_EQ(mock.calls(), hard ? 1u : 0u);
            if (!hard) {
                EXPECT_EQ(r.refusal_cause, RefusalCause::hard);
            } else if (!soft) {
                EXPECT_EQ(r.refusal_cause, RefusalCause::soft);
            }
        }
    }
}

TEST(Pipeline, EvidenceOutsideRetrievalIsPipelineError) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    PipelineConfig cfg;
    cfg.k = 1;
    MockProvider mock({{}, {}, {qa_reply(true, {2, 6}, "Yes.")}});
    try {
        rig.pipeline(mock, cfg).answer_question(kObama);
        FAIL();
    } catch (const PipelineError& e) {
        EXPECT_EQ(e.audit_id(), 1u);
        EXPECT_NE(e.raw_response().find("[6]"), std::string::npos);
    }
}

TEST(Pipeline, UnparseableOutputKeepsRawText) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {"Sure! The answer is yes."}});
    try {
        rig.pipeline(mock).answer_question(kObama);
        FAIL();
    } catch (const PipelineError& e) {
        EXPECT_EQ(e.raw_response(), "Sure! The answer is yes.");
    }
}

TEST(Pipeline, NoCitationsFallsBackToRetrieval) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {qa_reply(true, {}, "Yes.")}});
    auto r = rig.pipeline(mock).answer_question(kObama);
    EXPECT_EQ(r.evidence.size(), r.retrieval.hits.size());
}

TEST(Pipeline, ForcedBypassesGatesButRecordsJudgment) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {qa_reply(false, {}, "Everest.")}});
    auto r = rig.pipeline(mock).forced_answer(kMountain);
    EXPECT_TRUE(r.forced);
    EXPECT_EQ(r.status, Status::answered);
    EXPECT_EQ(r.answer, "Everest.");
    EXPECT_FALSE(r.judgment.i_hard);
    EXPECT_FALSE(r.judgment.i_soft);
    EXPECT_FALSE(r.judgment.i_final);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(Pipeline, DisabledGatesForceBitsTrue) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    PipelineConfig cfg;
    cfg.refusal.hard_enabled = false;
    cfg.refusal.soft_enabled = false;
    MockProvider mock({{}, {}, {qa_reply(false, {}, "Everest.")}});
    auto r = rig.pipeline(mock, cfg).answer_question(kMountain);
    EXPECT_EQ(r.status, Status::answered);
    EXPECT_TRUE(r.judgment.i_hard);
    EXPECT_TRUE(r.judgment.i_soft);
    EXPECT_GT(r.judgment.min_penalized_score, 0.75);
}

TEST(Pipeline, OverridesAlphaAndK) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {qa_reply(true, {}, "Everest.")}});
    auto p = rig.pipeline(mock);
    auto r = p.answer_question(kMountain, {kInf, 2});
    EXPECT_EQ(r.status, Status::answered);
    EXPECT_EQ(r.retrieval.hits.size(), 2u);
    EXPECT_EQ(r.judgment.alpha_used, kInf);
    EXPECT_THROW(p.answer_question(kObama, {0.0, std::nullopt}), ConfigError);
    EXPECT_THROW(p.answer_question(kObama, {std::nullopt, 0}), PreconditionError);
}

TEST(Pipeline, EmptyKnowledgeBaseAlwaysHardRefuses) {
    KnowledgeBase kb(HashEmbedder().id(), l2r::testing::fixed_clock);
    Rig rig(kb);
    MockProvider mock;
    auto r = rig.pipeline(mock).answer_question(kObama, {kInf, std::nullopt});
    EXPECT_EQ(r.refusal_cause, RefusalCause::hard);
    EXPECT_EQ(r.judgment.min_penalized_score, kInf);
}

TEST(Pipeline, MultipleChoicePrompt) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock({{}, {}, {qa_reply(true, {2}, "B")}});
    auto p = rig.pipeline(mock);
    Question q{kObama.text, {"No", "Yes"}, Task::mc1};
    auto r = p.answer_question(q);
    EXPECT_EQ(r.answer, "B");
    auto prompt = mock.audit().snapshot().at(0).request.at(0).content;
    EXPECT_NE(prompt.find("A. No\nB. Yes"), std::string::npos);
    EXPECT_NE(prompt.find("[2] Barack Obama was born in the United States. (confidence=1.0)"), std::string::npos);

    EXPECT_THROW(p.answer_question({"q", {"only"}, Task::mc1}), TooFewChoices);
    EXPECT_THROW(p.answer_question({"q", {}, Task::mc2}), TooFewChoices);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(Pipeline, StepByStepOffDropsReasoning) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    PipelineConfig cfg;
    cfg.step_by_step = false;
    MockProvider mock({{}, {}, {qa_reply(true, {2}, "Yes.")}});
    auto p = rig.pipeline(mock, cfg);
    auto r = p.answer_question(kObama);
    EXPECT_TRUE(r.reasoning.empty());
    EXPECT_EQ(p.render_main_prompt(kObama, r.retrieval).find("REASONING:"), std::string::npos);
}

TEST(Pipeline, JsonRecordShape) {
    auto kb = l2r::testing::sample_kb();
    Rig rig(kb);
    MockProvider mock;
    auto j = to_json(rig.pipeline(mock).answer_question(kMountain, {std::nullopt, 1}), "q9");
    EXPECT_EQ(j.dump(),
              R"({"id":"q9","status":"refused","refusal_cause":"hard","evidence":[],"reasoning":"","answer":"",)"
              R"("judgment":{"i_soft":false,"i_hard":false,"i_final":false,"min_score":)" +
                  nlohmann::json(j["judgment"]["min_score"]).dump() +
                  R"(,"alpha":0.75},"retrieval":[{"id":4,"confidence":0.9,"distance":)" +
                  nlohmann::json(j["retrieval"][0]["distance"]).dump() + "}]}");
}

TEST(Pipeline, HardGateMatchesBruteForceOnRandomKbs) {
    std::mt19937_64 rng(17);
    const char* vocab[] = {"red", "green", "blue", "sun", "moon", "city", "rain", "prime", "born", "tall"};
    for (int round = 0; round < 20; ++round) {
        KnowledgeBase kb(HashEmbedder().id(), l2r::testing::fixed_clock);
        for (int i = 0; i < 30; ++i) {
            std::string text = std::string(vocab[rng() % 10]) + " " + vocab[rng() % 10] + " " + std::to_string(i);
            kb.upsert_entry(text, static_cast<double>(rng() % 11) / 10.0, Source::manual, false);
        }
        Rig rig(kb);
        std::string query = std::string(vocab[rng() % 10]) + " " + vocab[rng() % 10];
        double alpha = 0.2 + static_cast<double>(rng() % 100) / 50.0;
        MockProvider mock({}, [](const std::string&) { return std::optional<std::string>("ANSWERABLE: YES\nANSWER: x"); });
        PipelineConfig cfg;
        cfg.refusal.alpha = alpha;
        auto r = rig.pipeline(mock, cfg).answer_question({query, {}, Task::open});

        double best = kInf;
        for (const auto& h : r.retrieval.hits) {
            if (h.confidence > 0) best = std::min(best, h.distance / h.confidence);
        }
        EXPECT_EQ(r.judgment.min_penalized_score, best);
        EXPECT_EQ(r.judgment.i_hard, best < alpha);
        EXPECT_EQ(mock.calls(), best < alpha ? 1u : 0u);
    }
}
