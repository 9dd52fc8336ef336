#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cok/encoder.hpp"
#include "cok/errors.hpp"
#include "cok/exemplar.hpp"
#include "cok/kb.hpp"
#include "cok/llm.hpp"
#include "cok/parse.hpp"
#include "cok/triple.hpp"

namespace cok {

enum class PromptVariant { FullCoK, WithoutET, WithoutEH };

inline std::string_view prompt_variant_name(PromptVariant v) {
    switch (v) {
        case PromptVariant::FullCoK: return "full";
        case PromptVariant::WithoutET: return "without_et";
        case PromptVariant::WithoutEH: return "without_eh";
    }
    return "unknown";
}

inline std::optional<PromptVariant> prompt_variant_from_name(std::string_view name) {
    if (name == "full") return PromptVariant::FullCoK;
    if (name == "without_et") return PromptVariant::WithoutET;
    if (name == "without_eh") return PromptVariant::WithoutEH;
    return std::nullopt;
}

struct PromptQuery {
    std::string question;
    std::vector<std::pair<char, std::string>> choices;
};

namespace detail {

inline void render_choices_line(std::string& out,
                                const std::vector<std::pair<char, std::string>>& choices) {
    if (choices.empty()) return;
    out.append("Answer Choices:");
    for (const auto& [letter, option] : choices) {
        out.push_back(' ');
        out.push_back('(');
        out.push_back(letter);
        out.append(") ");
        out.append(option);
    }
    out.push_back('\n');
}

}  // namespace detail

// The answer block of one exemplar, i.e. everything after "A: ".
inline std::string render_answer_block(const Exemplar& ex, PromptVariant variant) {
    std::string out;
    if (variant != PromptVariant::WithoutET) {
        if (ex.evidence_triples.empty()) {
            throw ConfigError("exemplar \"" + ex.question +
                              "\" has no evidence triples for this prompt variant");
        }
        out.append(kTriplesHeader);
        out.push_back('\n');
        for (std::size_t i = 0; i < ex.evidence_triples.size(); ++i) {
            out += std::to_string(i + 1) + ". " + ex.evidence_triples[i].render() + "\n";
        }
    }
    if (variant != PromptVariant::WithoutEH) {
        out.append(kExplanationHeader);
        out.push_back(' ');
        out.append(ex.explanation);
        out.push_back('\n');
    }
    out.append(render_answer_sentence(ex.answer));
    out.push_back('\n');
    return out;
}

// Full prompt: exemplars, then the query, then any injected knowledge triples
// one per line, ending with "A:". Pure function of its arguments.
inline std::string build_prompt(const std::vector<Exemplar>& exemplars,
                                const PromptQuery& query, PromptVariant variant,
                                const std::vector<Triple>& injected = {}) {
    if (exemplars.empty()) {
        throw ConfigError("build_prompt: at least one exemplar required");
    }
    std::string out;
    for (const auto& ex : exemplars) {
        out.append("Q: ");
        out.append(ex.question);
        out.push_back('\n');
        detail::render_choices_line(out, ex.choices);
        out.append("A: ");
        out.append(render_answer_block(ex, variant));
        out.push_back('\n');
    }
    out.append("Q: ");
    out.append(query.question);
    out.push_back('\n');
    detail::render_choices_line(out, query.choices);
    for (const auto& t : injected) {
        out.append(t.render());
        out.push_back('\n');
    }
    out.append("A:");
    return out;
}

// Appends newly injected triples to an existing prompt: the previous prompt
// minus its trailing "A:", the new lines, then "A:" again. Keeps prompt
// growth strictly monotone across rethink iterations.
inline std::string extend_prompt(const std::string& prompt,
                                 const std::vector<Triple>& new_triples) {
    if (!prompt.ends_with("A:")) {
        throw ContractViolation("extend_prompt: prompt does not end with \"A:\"");
    }
    std::string out = prompt.substr(0, prompt.size() - 2);
    for (const auto& t : new_triples) {
        out.append(t.render());
        out.push_back('\n');
    }
    out.append("A:");
    return out;
}

// Zero-shot rationale drafting plus candidate triple retrieval. The draft is
// not a usable exemplar until a human fills in the evidence triples and
// answer; it stays flagged unreviewed.
struct DraftExemplar {
    std::string question;
    std::string explanation;
    std::vector<std::pair<Triple, double>> candidates;
    bool unreviewed = true;
};

inline DraftExemplar assist_exemplar_construction(const std::string& question,
                                                  LLMBackend& llm,
                                                  const KnowledgeBase& kb,
                                                  const TextEncoder& encoder, int k,
                                                  const std::string& model_name = "") {
    GenerationRequest request;
    request.prompt = question + "\nLet's think step by step.";
    request.params = DecodingParams{};  // temperature 0
    request.model = model_name;
    const GenerationResponse response = llm.complete(request);
    DraftExemplar draft;
    draft.question = question;
    draft.explanation = response.texts.empty() ? std::string() : response.texts.front();
    if (k > 0 && !kb.empty()) {
        draft.candidates = kb.retrieve_similar(draft.explanation, k, encoder);
    }
    return draft;
}

}  // namespace cok
