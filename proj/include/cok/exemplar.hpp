#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cok/errors.hpp"
#include "cok/kb.hpp"
#include "cok/parse.hpp"
#include "cok/rng.hpp"
#include "cok/triple.hpp"

namespace cok {

// Annotated in-context demonstration: question, evidence triples, explanation
// hint and the final answer.
struct Exemplar {
    std::string question;
    std::vector<std::pair<char, std::string>> choices;  // empty when none
    std::vector<Triple> evidence_triples;
    std::string explanation;
    Answer answer;
    TaskType task_type = TaskType::MultiChoice;
};

// Exemplar files are JSON Lines with fields question, choices (optional),
// triples, explanation, answer, task_type.
inline std::vector<Exemplar> load_exemplars(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open exemplar file " + path);
    std::vector<Exemplar> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
        }
        Exemplar ex;
        for (const char* field : {"question", "triples", "explanation", "answer",
                                  "task_type"}) {
            if (!doc.contains(field)) {
                throw ParseError(path, line_no,
                                 std::string("missing field \"") + field + "\"");
            }
        }
        ex.question = doc["question"].get<std::string>();
        ex.explanation = doc["explanation"].get<std::string>();
        const auto task = task_type_from_name(doc["task_type"].get<std::string>());
        if (!task) {
            throw ParseError(path, line_no,
                             "unknown task_type " + doc["task_type"].dump());
        }
        ex.task_type = *task;
        if (doc.contains("choices")) {
            for (const auto& [letter, option] : doc["choices"].items()) {
                if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'E') {
                    throw ParseError(path, line_no, "choice letter must be A-E");
                }
                ex.choices.emplace_back(letter[0], option.get<std::string>());
            }
        }
        for (const auto& item : doc["triples"]) {
            if (!item.is_array() || item.size() != 3) {
                throw ParseError(path, line_no, "triples must be 3-element lists");
            }
            auto t = Triple::normalized(item[0].get<std::string>(),
                                        item[1].get<std::string>(),
                                        item[2].get<std::string>());
            if (!t) throw ParseError(path, line_no, "triple with empty field");
            ex.evidence_triples.push_back(std::move(*t));
        }
        auto answer = normalize_answer(doc["answer"].get<std::string>(), ex.task_type);
        if (!answer) {
            throw ParseError(path, line_no, "answer " + doc["answer"].dump() +
                                                " does not parse as " +
                                                std::string(task_type_name(ex.task_type)));
        }
        ex.answer = *answer;
        out.push_back(std::move(ex));
    }
    return out;
}

inline void save_exemplars(const std::vector<Exemplar>& exemplars,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& ex : exemplars) {
        nlohmann::json doc;
        doc["question"] = ex.question;
        if (!ex.choices.empty()) {
            nlohmann::json choices = nlohmann::json::object();
            for (const auto& [letter, option] : ex.choices) {
                choices[std::string(1, letter)] = option;
            }
            doc["choices"] = choices;
        }
        nlohmann::json triples = nlohmann::json::array();
        for (const auto& t : ex.evidence_triples) {
            triples.push_back({t.subject, t.relation, t.object});
        }
        doc["triples"] = triples;
        doc["explanation"] = ex.explanation;
        doc["answer"] = render_answer_value(ex.answer);
        doc["task_type"] = std::string(task_type_name(ex.task_type));
        out << doc.dump() << '\n';
    }
    if (!out) throw DataError("short write to " + path);
}

// Replaces exactly round(beta/100 * total triples) evidence triples, chosen
// uniformly by seed, with uniformly sampled KB triples. Explanations are left
// untouched: this builds the wrong-demonstration perturbation experiments.
inline std::vector<Exemplar> perturb_exemplars(std::vector<Exemplar> exemplars,
                                               double beta_percent,
                                               const KnowledgeBase& kb,
                                               std::uint64_t seed) {
    if (beta_percent < 0.0 || beta_percent > 100.0) {
        throw ConfigError("beta_percent must lie in [0, 100]");
    }
    std::vector<std::pair<std::size_t, std::size_t>> positions;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        for (std::size_t j = 0; j < exemplars[i].evidence_triples.size(); ++j) {
            positions.emplace_back(i, j);
        }
    }
    const auto target = static_cast<std::size_t>(
        std::llround(beta_percent / 100.0 * static_cast<double>(positions.size())));
    if (target == 0) return exemplars;
    if (kb.empty()) {
        throw ConfigError("perturb_exemplars: non-empty KB required when beta > 0");
    }
    Rng rng(seed);
    rng.shuffle(positions);
    for (std::size_t i = 0; i < target; ++i) {
        const auto [ei, ti] = positions[i];
        exemplars[ei].evidence_triples[ti] = kb.triples()[rng.index(kb.size())];
    }
    return exemplars;
}

}  // namespace cok
