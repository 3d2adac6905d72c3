#include "l2r/agents.hpp"

#include "l2r/errors.hpp"
#include "l2r/util.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

namespace l2r {

namespace {

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of the slot marker starting at body[i] ("{name}"), or 0.
std::size_t slot_at(std::string_view body, std::size_t i) {
    if (body[i] != '{') return 0;
    std::size_t j = i + 1;
    while (j < body.size() && is_slot_char(body[j])) ++j;
    if (j == i + 1 || j >= body.size() || body[j] != '}') return 0;
    return j - i + 1;
}

const char* const kMainQa =
    "You are the question-answering agent of a closed-book system. The knowledge listed below is\n"
    "everything you are allowed to know. Do not use any internal knowledge, and do not guess beyond it.\n"
    "\n"
    "Knowledge (format: [id] text (confidence=C)):\n"
    "{knowledge}\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "First judge whether the knowledge above is sufficient to answer the question. Then reply in exactly\n"
    "this layout:\n"
    "ANSWERABLE: YES or NO\n"
    "EVIDENCE: [comma-separated ids of the knowledge you relied on]\n"
    "{reasoning_format}"
    "ANSWER: <final answer>\n"
    "\n"
    "Always give your best ANSWER, even when ANSWERABLE is NO.\n";

const char* const kKnowledgeQ =
    "You write factual questions for building a knowledge base.\n"
    "\n"
    "Seed question:\n"
    "{seed}\n"
    "\n"
    "Write {count} new self-contained questions on the same topic as the seed. Each question must ask\n"
    "about exactly one fact. Do not answer them.\n"
    "Reply with a numbered list, one question per line:\n"
    "1. <question>\n";

const char* const kKnowledgeA =
    "Answer the question below with one short factual answer, then rate how likely it is that your\n"
    "answer is correct on a scale from 0 to 1.\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "Reply in exactly this layout:\n"
    "ANSWER: <answer>\n"
    "CONFIDENCE: <decimal between 0 and 1>\n";

const char* const kQa2Knowledge =
    "Rewrite the question and answer below as one declarative sentence stating a single fact.\n"
    "Do not add information that is not in the answer.\n"
    "\n"
    "Question: {question}\n"
    "Answer: {answer}\n"
    "\n"
    "Reply in exactly this layout:\n"
    "KNOWLEDGE: <one sentence>\n";

const char* const kMc1Wrap =
    "{question}\n"
    "\n"
    "Options:\n"
    "{options}\n"
    "\n"
    "Exactly one option is correct. Your ANSWER line must be \"ANSWER: <letter>\".";

const char* const kMc2Wrap =
    "{question}\n"
    "\n"
    "Options:\n"
    "{options}\n"
    "\n"
    "Judge every option independently; any number of them may be true. Your ANSWER must consist of\n"
    "exactly {count} lines, one per option, each \"OPTION <letter>: TRUE\" or \"OPTION <letter>: FALSE\".";

struct KeyLine {
    std::string key;    // upper-cased
    std::string value;  // text after the colon, trimmed
};

// Recognizes "KEY: value" for one of `keys` (case-insensitive, surrounding whitespace tolerated).
std::optional<KeyLine> match_key(std::string_view line, std::initializer_list<std::string_view> keys) {
    auto body = trim(line);
    auto colon = body.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto key = to_lower(trim(body.substr(0, colon)));
    for (auto candidate : keys) {
        if (key == to_lower(candidate)) {
            KeyLine out;
            out.key = std::string(candidate);
            out.value = std::string(trim(body.substr(colon + 1)));
            return out;
        }
    }
    return std::nullopt;
}

using Sections = std::map<std::string, std::string>;

// Splits text into keyed sections; a section runs until the next key line.
// The first occurrence of a key wins. Text before the first key is ignored.
Sections split_sections(std::string_view text, std::initializer_list<std::string_view> keys) {
    Sections out;
    std::string current;
    std::string buffer;
    auto flush = [&] {
        if (!current.empty() && !out.contains(current)) out[current] = std::string(trim(buffer));
    };
    for (const auto& line : split_lines(text)) {
        if (auto kl = match_key(line, keys)) {
            flush();
            current = kl->key;
            buffer = kl->value;
            continue;
        }
        if (!current.empty()) {
            buffer += '\n';
            buffer += line;
        }
    }
    flush();
    return out;
}

std::string strip_trailing_punct(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::string_view to_string(TemplateName name) noexcept {
    switch (name) {
        case TemplateName::main_qa: return "main_qa";
        case TemplateName::knowledge_q: return "knowledge_q";
        case TemplateName::knowledge_a: return "knowledge_a";
        case TemplateName::qa2knowledge: return "qa2knowledge";
        case TemplateName::mc1_wrap: return "mc1_wrap";
        case TemplateName::mc2_wrap: return "mc2_wrap";
    }
    return "main_qa";
}

std::vector<std::string> PromptTemplate::slots() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (auto len = slot_at(body, i)) {
            auto name = body.substr(i + 1, len - 2);
            if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
            i += len - 1;
        }
    }
    return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const SlotMap& slots) {
    std::string out;
    out.reserve(tmpl.body.size() + 256);
    const std::string_view body = tmpl.body;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (auto len = slot_at(body, i)) {
            auto name = body.substr(i + 1, len - 2);
            auto it = slots.find(name);
            if (it == slots.end()) throw MissingSlotError(std::string(name));
            out += it->second;
            i += len - 1;
        } else {
            out += body[i];
        }
    }
    return out;
}

PromptLibrary::PromptLibrary() {
    for (auto name : kAllTemplates) templates_[name] = PromptTemplate{name, default_body(name)};
}

std::string PromptLibrary::default_body(TemplateName name) {
    switch (name) {
        case TemplateName::main_qa: return kMainQa;
        case TemplateName::knowledge_q: return kKnowledgeQ;
        case TemplateName::knowledge_a: return kKnowledgeA;
        case TemplateName::qa2knowledge: return kQa2Knowledge;
        case TemplateName::mc1_wrap: return kMc1Wrap;
        case TemplateName::mc2_wrap: return kMc2Wrap;
    }
    return {};
}

std::size_t PromptLibrary::load_overrides(const std::string& dir) {
    std::size_t loaded = 0;
    for (auto name : kAllTemplates) {
        auto path = std::filesystem::path(dir) / (std::string(to_string(name)) + ".txt");
        if (!std::filesystem::exists(path)) continue;
        set(name, read_file(path.string()));
        ++loaded;
    }
    return loaded;
}

void PromptLibrary::set(TemplateName name, std::string body) { templates_[name] = PromptTemplate{name, std::move(body)}; }

const PromptTemplate& PromptLibrary::get(TemplateName name) const { return templates_.at(name); }

std::string format_knowledge_lines(const RetrievalSet& retrieval) {
    if (retrieval.hits.empty()) return "(no knowledge retrieved)";
    std::string out;
    for (const auto& hit : retrieval.hits) {
        if (!out.empty()) out += '\n';
        out += "[" + std::to_string(hit.entry_id) + "] " + hit.text + " (confidence=" + format_decimal(hit.confidence) + ")";
    }
    return out;
}

MainQAOutput parse_main_qa_output(std::string_view text) {
    auto sections = split_sections(text, {"ANSWERABLE", "EVIDENCE", "REASONING", "ANSWER"});
    auto answerable = sections.find("ANSWERABLE");
    if (answerable == sections.end()) throw ParseError("model output has no ANSWERABLE line");

    MainQAOutput out;
    // Only the leading word counts: "YES", "Yes.", "yes, because ..." are all YES.
    std::string_view value = answerable->second;
    std::size_t word_end = 0;
    while (word_end < value.size() && std::isalpha(static_cast<unsigned char>(value[word_end]))) ++word_end;
    auto flag = to_lower(value.substr(0, word_end));
    if (flag == "yes") {
        out.answerable = true;
    } else if (flag == "no") {
        out.answerable = false;
    } else {
        throw ParseError("ANSWERABLE must be YES or NO, got '" + flag + "'");
    }

    if (auto ev = sections.find("EVIDENCE"); ev != sections.end()) {
        std::string list = ev->second;
        std::replace_if(list.begin(), list.end(), [](char c) { return c == '[' || c == ']' || c == ','; }, ' ');
        auto lowered = to_lower(trim(list));
        if (lowered != "none" && lowered != "n/a") {
            std::size_t i = 0;
            while (i < list.size()) {
                if (std::isspace(static_cast<unsigned char>(list[i]))) {
                    ++i;
                    continue;
                }
                std::size_t j = i;
                while (j < list.size() && !std::isspace(static_cast<unsigned char>(list[j]))) ++j;
                std::string_view token(list.data() + i, j - i);
                if (!token.empty() && token.front() == '#') token.remove_prefix(1);
                if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                    throw ParseError("EVIDENCE holds a non-numeric id '" + std::string(token) + "'");
                }
                auto id = std::stoull(std::string(token));
                if (std::find(out.evidence_ids.begin(), out.evidence_ids.end(), id) == out.evidence_ids.end()) {
                    out.evidence_ids.push_back(id);
                }
                i = j;
            }
        }
    }
    if (auto r = sections.find("REASONING"); r != sections.end()) out.reasoning = r->second;
    if (auto a = sections.find("ANSWER"); a != sections.end()) out.answer = a->second;
    if (out.answerable && out.answer.empty()) throw ParseError("ANSWERABLE: YES without an ANSWER");
    return out;
}

ConfidenceAnswer parse_confidence_answer(std::string_view text) {
    auto sections = split_sections(text, {"ANSWER", "CONFIDENCE"});
    auto answer = sections.find("ANSWER");
    if (answer == sections.end() || answer->second.empty()) throw ParseError("output has no ANSWER");
    auto conf = sections.find("CONFIDENCE");
    if (conf == sections.end()) throw ParseError("output has no CONFIDENCE");
    double value = 0.0;
    auto first_line = split_lines(conf->second);
    if (first_line.empty() || !parse_double(first_line.front(), value)) {
        throw ParseError("CONFIDENCE is not a decimal: '" + conf->second + "'");
    }
    if (!(value >= 0.0 && value <= 1.0)) throw RangeError("CONFIDENCE " + conf->second + " outside [0, 1]");
    return {answer->second, value};
}

std::vector<std::string> parse_question_list(std::string_view text) {
    std::vector<std::string> out;
    std::set<std::string, std::less<>> seen;
    bool numbered = false;
    for (const auto& raw : split_lines(text)) {
        auto line = trim(raw);
        std::size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) continue;
        numbered = true;
        auto question = std::string(trim(line.substr(i + 1)));
        if (question.empty() || seen.contains(question)) continue;
        seen.insert(question);
        out.push_back(std::move(question));
    }
    if (!numbered) throw ParseError("no numbered question lines found");
    return out;
}

std::string parse_knowledge_sentence(std::string_view text) {
    auto sections = split_sections(text, {"KNOWLEDGE"});
    auto k = sections.find("KNOWLEDGE");
    if (k == sections.end() || k->second.empty()) throw ParseError("output has no KNOWLEDGE line");
    std::string joined = k->second;
    std::replace(joined.begin(), joined.end(), '\n', ' ');
    return joined;
}

char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

std::optional<std::size_t> parse_mc1_choice(std::string_view answer, std::size_t choice_count) {
    auto s = trim(answer);
    if (auto lower = to_lower(s.substr(0, std::min<std::size_t>(6, s.size()))); lower == "option") s = trim(s.substr(6));
    if (!s.empty() && s.front() == '(') s.remove_prefix(1);
    if (s.empty() || s.front() < 'A' || s.front() > 'Z') return std::nullopt;
    if (s.size() > 1 && std::isalpha(static_cast<unsigned char>(s[1]))) return std::nullopt;
    auto index = static_cast<std::size_t>(s.front() - 'A');
    if (index >= choice_count) return std::nullopt;
    return index;
}

std::vector<std::optional<bool>> parse_mc2_labels(std::string_view answer, std::size_t choice_count) {
    std::vector<std::optional<bool>> labels(choice_count);
    for (const auto& raw : split_lines(answer)) {
        auto line = trim(raw);
        if (line.size() < 7 || to_lower(line.substr(0, 6)) != "option") continue;
        auto rest = trim(line.substr(6));
        if (rest.empty() || rest.front() < 'A' || rest.front() > 'Z') continue;
        auto index = static_cast<std::size_t>(rest.front() - 'A');
        auto colon = rest.find(':');
        if (colon == std::string_view::npos || index >= choice_count) continue;
        auto verdict = to_lower(strip_trailing_punct(rest.substr(colon + 1)));
        if (labels[index]) continue;
        if (verdict == "true") labels[index] = true;
        else if (verdict == "false") labels[index] = false;
    }
    return labels;
}

}  // namespace l2r
