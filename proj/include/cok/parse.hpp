#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cok/errors.hpp"
#include "cok/text.hpp"
#include "cok/triple.hpp"

namespace cok {

enum class TaskType { MultiChoice, YesNo, Numeric, StringConcat };

inline std::string_view task_type_name(TaskType t) {
    switch (t) {
        case TaskType::MultiChoice: return "multi_choice";
        case TaskType::YesNo: return "yes_no";
        case TaskType::Numeric: return "numeric";
        case TaskType::StringConcat: return "string";
    }
    return "unknown";
}

inline std::optional<TaskType> task_type_from_name(std::string_view name) {
    if (name == "multi_choice") return TaskType::MultiChoice;
    if (name == "yes_no") return TaskType::YesNo;
    if (name == "numeric") return TaskType::Numeric;
    if (name == "string") return TaskType::StringConcat;
    return std::nullopt;
}

struct ChoiceAnswer {
    char letter = 'A';
    bool operator==(const ChoiceAnswer&) const = default;
};
struct YesNoAnswer {
    bool value = false;
    bool operator==(const YesNoAnswer&) const = default;
};
struct NumberAnswer {
    double value = 0.0;
    bool operator==(const NumberAnswer&) const = default;
};
struct TextAnswer {
    std::string value;
    bool operator==(const TextAnswer&) const = default;
};

using Answer = std::variant<ChoiceAnswer, YesNoAnswer, NumberAnswer, TextAnswer>;

inline constexpr double kNumericTolerance = 1e-6;

// Equality used for voting and accuracy: numbers within 1e-6 absolute, text
// case-insensitive after trimming.
inline bool answers_equal(const Answer& a, const Answer& b) {
    if (a.index() != b.index()) return false;
    if (const auto* ca = std::get_if<ChoiceAnswer>(&a)) {
        return ca->letter == std::get<ChoiceAnswer>(b).letter;
    }
    if (const auto* ya = std::get_if<YesNoAnswer>(&a)) {
        return ya->value == std::get<YesNoAnswer>(b).value;
    }
    if (const auto* na = std::get_if<NumberAnswer>(&a)) {
        return std::fabs(na->value - std::get<NumberAnswer>(b).value) <=
               kNumericTolerance;
    }
    return fold_key(std::get<TextAnswer>(a).value) ==
           fold_key(std::get<TextAnswer>(b).value);
}

// Bare value form: "B", "yes", "8", "nk".
inline std::string render_answer_value(const Answer& answer) {
    if (const auto* c = std::get_if<ChoiceAnswer>(&answer)) {
        return std::string(1, c->letter);
    }
    if (const auto* y = std::get_if<YesNoAnswer>(&answer)) {
        return y->value ? "yes" : "no";
    }
    if (const auto* n = std::get_if<NumberAnswer>(&answer)) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), n->value);
        return std::string(buf, res.ptr);
    }
    return std::get<TextAnswer>(answer).value;
}

// Prompt/answer-sentence form: choices are parenthesized, "(B)".
inline std::string render_answer_inline(const Answer& answer) {
    if (const auto* c = std::get_if<ChoiceAnswer>(&answer)) {
        return std::string("(") + c->letter + ")";
    }
    return render_answer_value(answer);
}

inline std::string render_answer_sentence(const Answer& answer) {
    return "So the answer is " + render_answer_inline(answer) + ".";
}

inline std::optional<Answer> normalize_answer(std::string_view raw, TaskType task) {
    const std::string text = trim(raw);
    if (text.empty()) return std::nullopt;
    switch (task) {
        case TaskType::MultiChoice: {
            // "(B)" first, then a standalone letter A-E.
            for (std::size_t i = 0; i + 2 < text.size(); ++i) {
                if (text[i] == '(' && text[i + 2] == ')') {
                    const char c = static_cast<char>(
                        std::toupper(static_cast<unsigned char>(text[i + 1])));
                    if (c >= 'A' && c <= 'E') return Answer{ChoiceAnswer{c}};
                }
            }
            for (std::size_t i = 0; i < text.size(); ++i) {
                const char c = static_cast<char>(
                    std::toupper(static_cast<unsigned char>(text[i])));
                if (c < 'A' || c > 'E') continue;
                const bool left_ok =
                    i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
                const bool right_ok =
                    i + 1 == text.size() ||
                    !std::isalnum(static_cast<unsigned char>(text[i + 1]));
                if (left_ok && right_ok) return Answer{ChoiceAnswer{c}};
            }
            return std::nullopt;
        }
        case TaskType::YesNo: {
            for (const auto& token : tokenize_words(text)) {
                if (token == "yes" || token == "true") return Answer{YesNoAnswer{true}};
                if (token == "no" || token == "false") return Answer{YesNoAnswer{false}};
            }
            return std::nullopt;
        }
        case TaskType::Numeric: {
            std::string cleaned;
            cleaned.reserve(text.size());
            for (char ch : text) {
                if (ch == '$' || ch == ',') continue;
                cleaned.push_back(ch);
            }
            std::string t = trim(cleaned);
            while (!t.empty() && t.back() == '.') t.pop_back();
            // first decimal token, optional sign/exponent
            for (std::size_t i = 0; i < t.size(); ++i) {
                const bool starts_number =
                    std::isdigit(static_cast<unsigned char>(t[i])) ||
                    ((t[i] == '-' || t[i] == '+') && i + 1 < t.size() &&
                     std::isdigit(static_cast<unsigned char>(t[i + 1])));
                if (!starts_number) continue;
                const char* begin = t.c_str() + i;
                char* end = nullptr;
                const double value = std::strtod(begin, &end);
                if (end != begin) return Answer{NumberAnswer{value}};
            }
            return std::nullopt;
        }
        case TaskType::StringConcat: {
            std::string t = trim(text);
            while (!t.empty() && std::string_view(".,!?;:").find(t.back()) !=
                                     std::string_view::npos) {
                t.pop_back();
            }
            t = trim(t);
            if (t.empty()) return std::nullopt;
            return Answer{TextAnswer{t}};
        }
    }
    return std::nullopt;
}

struct ParseWarning {
    enum class Kind { NoAnswer, MalformedTriple, MissingHeader };
    Kind kind;
    std::string detail;
};

// Parsed completion: evidence triples, explanation hint text, and the typed
// final answer. Total parse failure is an empty chain plus warnings, never an
// exception.
struct ReasoningChain {
    std::vector<Triple> evidence_triples;
    std::string explanation;
    std::optional<Answer> answer;
    std::vector<ParseWarning> warnings;

    bool operator==(const ReasoningChain& other) const {
        if (evidence_triples != other.evidence_triples) return false;
        if (explanation != other.explanation) return false;
        if (answer.has_value() != other.answer.has_value()) return false;
        if (answer && !answers_equal(*answer, *other.answer)) return false;
        return true;
    }
};

inline constexpr std::string_view kTriplesHeader = "Evidence triples:";
inline constexpr std::string_view kExplanationHeader = "Explanation hints:";
inline constexpr std::string_view kAnswerMarker = "So the answer is";

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

// "<index>. (<s>, <r>, <o>)"; the first '(' and the last ')' delimit the
// triple, the body splits on its first two commas so the object may contain
// commas. Returns nullopt when the line is not triple-shaped at all.
struct TripleLine {
    std::optional<Triple> triple;
    bool malformed = false;
    std::string detail;
};

inline std::optional<TripleLine> parse_triple_line(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t digits_start = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == digits_start) return std::nullopt;  // no leading index
    if (i >= line.size() || line[i] != '.') return std::nullopt;
    ++i;

    TripleLine out;
    const std::size_t open = line.find('(', i);
    const std::size_t close = line.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos ||
        close <= open) {
        out.malformed = true;
        out.detail = "numbered line without (s, r, o): " + std::string(trim(line));
        return out;
    }
    const std::string_view body = line.substr(open + 1, close - open - 1);
    const std::size_t c1 = body.find(',');
    if (c1 == std::string_view::npos) {
        out.malformed = true;
        out.detail = "triple with too few fields: " + std::string(trim(line));
        return out;
    }
    const std::size_t c2 = body.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
        out.malformed = true;
        out.detail = "triple with too few fields: " + std::string(trim(line));
        return out;
    }
    auto t = Triple::normalized(body.substr(0, c1), body.substr(c1 + 1, c2 - c1 - 1),
                                body.substr(c2 + 1));
    if (!t) {
        out.malformed = true;
        out.detail = "triple with empty field: " + std::string(trim(line));
        return out;
    }
    out.triple = std::move(*t);
    return out;
}

}  // namespace detail

inline ReasoningChain parse_response(std::string_view text, TaskType task) {
    ReasoningChain chain;

    const std::size_t triples_at = text.find(kTriplesHeader);
    if (triples_at == std::string_view::npos) {
        chain.warnings.push_back(
            {ParseWarning::Kind::MissingHeader, "no \"Evidence triples:\" header"});
    }
    const std::size_t explanation_at = text.find(kExplanationHeader);
    const std::size_t answer_at = text.rfind(kAnswerMarker);

    // Triples: numbered lines between the triples header and whichever of the
    // explanation header / answer sentence comes first.
    if (triples_at != std::string_view::npos) {
        std::size_t region_end = text.size();
        if (explanation_at != std::string_view::npos && explanation_at > triples_at) {
            region_end = std::min(region_end, explanation_at);
        }
        if (answer_at != std::string_view::npos && answer_at > triples_at) {
            region_end = std::min(region_end, answer_at);
        }
        const std::string_view region =
            text.substr(triples_at + kTriplesHeader.size(),
                        region_end - (triples_at + kTriplesHeader.size()));
        for (std::string_view line : detail::split_lines(region)) {
            auto parsed = detail::parse_triple_line(line);
            if (!parsed) continue;
            if (parsed->malformed) {
                chain.warnings.push_back(
                    {ParseWarning::Kind::MalformedTriple, parsed->detail});
                continue;
            }
            chain.evidence_triples.push_back(std::move(*parsed->triple));
        }
    }

    if (explanation_at != std::string_view::npos) {
        std::size_t end = text.size();
        if (answer_at != std::string_view::npos && answer_at > explanation_at) {
            end = answer_at;
        }
        if (triples_at != std::string_view::npos && triples_at > explanation_at) {
            end = std::min(end, triples_at);
        }
        const std::size_t begin = explanation_at + kExplanationHeader.size();
        chain.explanation = trim(text.substr(begin, end - begin));
    } else {
        chain.warnings.push_back(
            {ParseWarning::Kind::MissingHeader, "no \"Explanation hints:\" header"});
    }

    if (answer_at != std::string_view::npos) {
        std::size_t end = text.find('\n', answer_at);
        if (end == std::string_view::npos) end = text.size();
        const std::size_t begin = answer_at + kAnswerMarker.size();
        chain.answer = normalize_answer(text.substr(begin, end - begin), task);
    }
    if (!chain.answer) {
        chain.warnings.push_back(
            {ParseWarning::Kind::NoAnswer, "no parseable final answer"});
    }
    return chain;
}

// Canonical answer-block rendering, the inverse of parse_response for
// well-formed chains.
inline std::string render_chain(const ReasoningChain& chain) {
    std::string out;
    out.append(kTriplesHeader);
    out.push_back('\n');
    for (std::size_t i = 0; i < chain.evidence_triples.size(); ++i) {
        out += std::to_string(i + 1) + ". " + chain.evidence_triples[i].render() + "\n";
    }
    out.append(kExplanationHeader);
    out.push_back(' ');
    out.append(chain.explanation);
    out.push_back('\n');
    if (chain.answer) {
        out.append(render_answer_sentence(*chain.answer));
        out.push_back('\n');
    }
    return out;
}

}  // namespace cok
