#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cok/errors.hpp"
#include "cok/parse.hpp"
#include "cok/text.hpp"

namespace cok {

struct DatasetRecord {
    std::string id;
    std::string question;
    std::vector<std::pair<char, std::string>> choices;
    Answer gold_answer;
    TaskType task_type = TaskType::MultiChoice;
};

// JSON Lines with fields id, question, choices (optional), answer, task_type.
inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset " + path);
    std::vector<DatasetRecord> out;
    std::unordered_set<std::string> seen_ids;
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
        for (const char* field : {"id", "question", "answer", "task_type"}) {
            if (!doc.contains(field)) {
                throw ParseError(path, line_no,
                                 std::string("missing field \"") + field + "\"");
            }
        }
        DatasetRecord record;
        record.id = doc["id"].get<std::string>();
        if (!seen_ids.insert(record.id).second) {
            throw ParseError(path, line_no, "duplicate id \"" + record.id + "\"");
        }
        record.question = doc["question"].get<std::string>();
        const auto task = task_type_from_name(doc["task_type"].get<std::string>());
        if (!task) {
            throw ParseError(path, line_no,
                             "unknown task_type " + doc["task_type"].dump());
        }
        record.task_type = *task;
        if (doc.contains("choices")) {
            for (const auto& [letter, option] : doc["choices"].items()) {
                if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'E') {
                    throw ParseError(path, line_no, "choice letter must be A-E");
                }
                record.choices.emplace_back(letter[0], option.get<std::string>());
            }
        }
        const auto gold = normalize_answer(doc["answer"].get<std::string>(),
                                           record.task_type);
        if (!gold) {
            throw ParseError(path, line_no,
                             "answer " + doc["answer"].dump() + " does not parse as " +
                                 std::string(task_type_name(record.task_type)));
        }
        record.gold_answer = *gold;
        if (const auto* choice = std::get_if<ChoiceAnswer>(&record.gold_answer)) {
            if (!record.choices.empty()) {
                bool found = false;
                for (const auto& [letter, option] : record.choices) {
                    found |= letter == choice->letter;
                }
                if (!found) {
                    throw ParseError(path, line_no,
                                     std::string("gold letter ") + choice->letter +
                                         " is not among the listed choices");
                }
            }
        }
        out.push_back(std::move(record));
    }
    return out;
}

// Fraction of predictions matching gold; an absent prediction counts wrong.
inline double accuracy(const std::vector<std::optional<Answer>>& predictions,
                       const std::vector<Answer>& gold) {
    if (predictions.size() != gold.size()) {
        throw ContractViolation("accuracy: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(gold.size()) +
                                " gold answers");
    }
    if (gold.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predictions[i] && answers_equal(*predictions[i], gold[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

}  // namespace cok
