#pragma once

#include "l2r/agents.hpp"
#include "l2r/evaluation.hpp"
#include "l2r/knowledge_store.hpp"
#include "l2r/llm_gateway.hpp"
#include "l2r/pipeline.hpp"
#include "l2r/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <optional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace l2r::testing {

inline std::string fixed_clock() { return "2024-01-01T00:00:00Z"; }

/// The six-entry sample KB, ids 1..6, loaded verbatim.
inline const char* kSampleKbJsonl =
    R"({"id":1,"text":"The sun appears white when viewed from space.","confidence":1.0,"source":"manual","created_at":"2024-01-01T00:00:00Z","meta":{"verified":true}}
{"id":2,"text":"Barack Obama was born in the United States.","confidence":1.0,"source":"manual","created_at":"2024-01-01T00:00:00Z","meta":{"verified":true}}
{"id":3,"text":"91 is not a prime number.","confidence":1.0,"source":"manual","created_at":"2024-01-01T00:00:00Z","meta":{"verified":true}}
{"id":4,"text":"The city that is cloudy literally all the time is Lima, Peru.","confidence":0.9,"source":"ake","created_at":"2024-01-01T00:00:00Z","meta":{}}
{"id":5,"text":"Muscle cannot turn into fat. Muscle and fat are two different types of tissues in the body.","confidence":0.9,"source":"ake","created_at":"2024-01-01T00:00:00Z","meta":{}}
{"id":6,"text":"A trait that makes humans unique is their ability to communicate through complex language.","confidence":0.8,"source":"ake","created_at":"2024-01-01T00:00:00Z","meta":{}}
)";

inline KnowledgeBase sample_kb() {
    KnowledgeBase kb(HashEmbedder().id(), fixed_clock);
    kb.import_jsonl(kSampleKbJsonl);
    return kb;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("l2r-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string str(const std::string& child = {}) const {
        return child.empty() ? path_.string() : (path_ / child).string();
    }

private:
    std::filesystem::path path_;
};

/// Main-QA reply in the expected grammar.
inline std::string qa_reply(bool answerable, const std::vector<EntryId>& evidence, std::string answer,
                            std::string reasoning = "From the retrieved knowledge.") {
    std::string ev;
    if (evidence.empty()) {
        ev = "none";
    } else {
        for (std::size_t i = 0; i < evidence.size(); ++i) ev += (i ? ", [" : "[") + std::to_string(evidence[i]) + "]";
    }
    return std::string("ANSWERABLE: ") + (answerable ? "YES" : "NO") + "\nEVIDENCE: " + ev + "\nREASONING: " +
           reasoning + "\nANSWER: " + answer;
}

/// Index + embedder + prompts bundle for building pipelines in tests.
struct Rig {
    HashEmbedder embedder;
    PromptLibrary prompts;
    std::shared_ptr<const VectorIndex> index;

    explicit Rig(const KnowledgeBase& kb) : index(std::make_shared<const VectorIndex>(build_index(kb, embedder))) {}

    Pipeline pipeline(ChatProvider& provider, PipelineConfig config = {}) {
        return Pipeline(index, embedder, provider, prompts, config);
    }
};

/// AKE templates reduced to tagged one-liners so a responder can route them.
inline PromptLibrary ake_prompts() {
    PromptLibrary lib;
    lib.set(TemplateName::knowledge_q, "GEN {count}|{seed}");
    lib.set(TemplateName::knowledge_a, "ANS {question}");
    lib.set(TemplateName::qa2knowledge, "KN {question}|{answer}");
    return lib;
}

/// Deterministic model for ake_prompts(): seed "s?" yields questions
/// "s qN?", answers are "ans(<q>)" with a confidence derived from the
/// question hash, and knowledge is "Fact about <q> is <answer>."
struct AkeModel {
    std::function<bool(const std::string& question)> malformed_answer = [](const std::string&) { return false; };

    static double confidence_for(const std::string& question) {
        return static_cast<double>(fnv1a64(question) % 101) / 100.0;
    }
    static std::string fact_for(const std::string& question) {
        auto q = question;
        if (!q.empty() && q.back() == '?') q.pop_back();
        return "Fact about " + q + " is ans.";
    }

    std::optional<std::string> operator()(const std::string& prompt) const {
        if (prompt.rfind("GEN ", 0) == 0) {
            auto bar = prompt.find('|');
            auto count = std::stoul(prompt.substr(4, bar - 4));
            auto seed = prompt.substr(bar + 1);
            while (!seed.empty() && (seed.back() == '?' || seed.back() == '.')) seed.pop_back();
            std::string out;
            for (std::size_t i = 1; i <= count; ++i) out += std::to_string(i) + ". " + seed + " q" + std::to_string(i) + "?\n";
            return out;
        }
        if (prompt.rfind("ANS ", 0) == 0) {
            auto q = prompt.substr(4);
            if (malformed_answer(q)) return "I am not sure.";
            return "ANSWER: ans\nCONFIDENCE: " + format_decimal(confidence_for(q));
        }
        if (prompt.rfind("KN ", 0) == 0) {
            auto q = prompt.substr(3, prompt.find('|') - 3);
            return "KNOWLEDGE: " + fact_for(q);
        }
        return std::nullopt;
    }
};

/// The question block of a main-QA prompt: from "Question:" to the first blank line.
inline std::optional<std::string> question_in_prompt(const std::string& prompt) {
    auto start = prompt.find("\nQuestion:\n");
    if (start == std::string::npos) return std::nullopt;
    start += 11;
    return prompt.substr(start, prompt.find("\n\n", start) - start);
}

/// Retrieved ids in prompt order, read from "[id] text" lines.
inline std::vector<EntryId> ids_in_prompt(const std::string& prompt) {
    std::vector<EntryId> ids;
    for (const auto& line : split_lines(prompt)) {
        if (line.size() < 3 || line[0] != '[' || !std::isdigit(static_cast<unsigned char>(line[1]))) continue;
        ids.push_back(std::stoull(line.substr(1, line.find(']') - 1)));
    }
    return ids;
}

/// Oracle main-QA agent: answers (correctly) exactly when one of the
/// record's gold_knowledge facts appears among the retrieved knowledge lines,
/// otherwise declares the question unanswerable.
struct OracleAgent {
    std::vector<DatasetRecord> dataset;

    std::optional<std::string> operator()(const std::string& prompt) const {
        auto asked = question_in_prompt(prompt);
        if (!asked) return std::nullopt;
        const DatasetRecord* record = nullptr;
        for (const auto& r : dataset) {
            if (r.question == *asked) record = &r;
        }
        if (!record) return std::nullopt;
        for (const auto& line : split_lines(prompt)) {
            if (line.size() < 3 || line[0] != '[') continue;
            for (const auto& fact : record->gold_knowledge.value_or(std::vector<std::string>{})) {
                if (line.find("] " + fact + " (confidence=") == std::string::npos) continue;
                auto id = std::stoull(line.substr(1, line.find(']') - 1));
                return qa_reply(true, {id}, correct_answer(*record));
            }
        }
        return std::string("ANSWERABLE: NO");
    }

    static std::string correct_answer(const DatasetRecord& r) {
        if (r.task == Task::mc1) return std::string(1, option_letter(r.gold.front()));
        std::string out;
        for (std::size_t i = 0; i < r.choices.size(); ++i) {
            bool truth = std::find(r.gold.begin(), r.gold.end(), i) != r.gold.end();
            out += std::string("\nOPTION ") + option_letter(i) + ": " + (truth ? "TRUE" : "FALSE");
        }
        return out;
    }
};

/// n mc1 records over made-up tokens; record i's single gold fact is its
/// question plus one extra token, so only its own fact lands near it.
inline std::vector<DatasetRecord> synthetic_dataset(std::size_t n, std::uint64_t seed = 7) {
    static const char* syll[] = {"zor", "blax", "quim", "vex", "trul", "mip", "dra", "kon", "fel", "snu", "wib", "gol"};
    std::mt19937_64 rng(seed);
    std::vector<DatasetRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string q;
        for (int w = 0; w < 5; ++w) {
            std::string word;
            for (int s = 0; s < 3; ++s) word += syll[rng() % std::size(syll)];
            q += (w ? " " : "") + word;
        }
        q += " n" + std::to_string(i);
        DatasetRecord r;
        r.id = "s" + std::to_string(i);
        r.task = Task::mc1;
        r.question = q;
        r.choices = {"alpha", "beta", "gamma"};
        r.gold = {static_cast<std::size_t>(rng() % 3)};
        r.gold_knowledge = std::vector<std::string>{q + " holds."};
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace l2r::testing
