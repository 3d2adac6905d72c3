#pragma once

#include "l2r/retrieval.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace l2r {

enum class TemplateName { main_qa, knowledge_q, knowledge_a, qa2knowledge, mc1_wrap, mc2_wrap };

inline constexpr std::array kAllTemplates = {TemplateName::main_qa,      TemplateName::knowledge_q,
                                             TemplateName::knowledge_a,  TemplateName::qa2knowledge,
                                             TemplateName::mc1_wrap,     TemplateName::mc2_wrap};

std::string_view to_string(TemplateName name) noexcept;

/// Template body with {slot_name} markers (slot names are [a-z_]+; any other
/// brace is literal).
struct PromptTemplate {
    TemplateName name;
    std::string body;

    /// Slot names in order of first appearance.
    [[nodiscard]] std::vector<std::string> slots() const;
};

using SlotMap = std::map<std::string, std::string, std::less<>>;

/// Single pass substitution; slot values are never rescanned. Throws
/// MissingSlotError for the first slot absent from `slots`.
std::string render_prompt(const PromptTemplate& tmpl, const SlotMap& slots);

/// Built-in templates, optionally overridden by `<name>.txt` files.
class PromptLibrary {
public:
    PromptLibrary();

    /// Replaces built-ins with any `<dir>/<name>.txt` present. Returns the number loaded.
    std::size_t load_overrides(const std::string& dir);
    void set(TemplateName name, std::string body);
    [[nodiscard]] const PromptTemplate& get(TemplateName name) const;

    static std::string default_body(TemplateName name);

private:
    std::map<TemplateName, PromptTemplate> templates_;
};

/// One numbered knowledge line per hit: "[id] text (confidence=C)".
std::string format_knowledge_lines(const RetrievalSet& retrieval);

struct MainQAOutput {
    bool answerable = false;
    std::vector<EntryId> evidence_ids;
    std::string reasoning;
    std::string answer;

    friend bool operator==(const MainQAOutput&, const MainQAOutput&) = default;
};

struct ConfidenceAnswer {
    std::string answer;
    double confidence = 0.0;

    friend bool operator==(const ConfidenceAnswer&, const ConfidenceAnswer&) = default;
};

/// Layout: "ANSWERABLE: YES|NO", "EVIDENCE: [id, ...]", "REASONING: ..." (may
/// span lines), "ANSWER: ..." (runs to the end). Keys are case-insensitive.
/// ANSWERABLE is mandatory; ANSWERABLE: YES also requires a non-empty ANSWER.
MainQAOutput parse_main_qa_output(std::string_view text);

/// "ANSWER: <text>" then "CONFIDENCE: <decimal>". Out-of-range confidence is
/// a RangeError, never clamped.
ConfidenceAnswer parse_confidence_answer(std::string_view text);

/// Numbered lines "1. q" (or "1) q"), trimmed, empties dropped, exact
/// duplicates removed keeping the first.
std::vector<std::string> parse_question_list(std::string_view text);

/// "KNOWLEDGE: <sentence>".
std::string parse_knowledge_sentence(std::string_view text);

/// Option letter A, B, ... for index i.
char option_letter(std::size_t index);

/// Leading option letter of an MC1 answer ("B", "B.", "(B) text", "Option B").
std::optional<std::size_t> parse_mc1_choice(std::string_view answer, std::size_t choice_count);

/// Per-option TRUE/FALSE labels from "OPTION <letter>: TRUE|FALSE" lines;
/// options without a line stay nullopt.
std::vector<std::optional<bool>> parse_mc2_labels(std::string_view answer, std::size_t choice_count);

}  // namespace l2r
