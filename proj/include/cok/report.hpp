#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cok/dataset.hpp"
#include "cok/llm.hpp"
#include "cok/rethink.hpp"
#include "cok/verify.hpp"

namespace cok {

struct EvalReport {
    nlohmann::json manifest;
    double accuracy = 0.0;
    bool empty_run = false;
    std::map<int, int> iteration_histogram;
    long exact_count = 0;
    long implicit_count = 0;
    long unverifiable_count = 0;
    struct QueryOutcome {
        std::string id;
        std::optional<Answer> predicted;
        Answer gold;
        bool correct = false;
        bool failed = false;
        std::string resolution;
        int iterations = 0;
    };
    std::vector<QueryOutcome> outcomes;
};

inline EvalReport build_report(const std::vector<RethinkOutcome>& outcomes,
                               const std::vector<DatasetRecord>& dataset,
                               nlohmann::json manifest) {
    if (outcomes.size() != dataset.size()) {
        throw ContractViolation("build_report: outcome/dataset size mismatch");
    }
    EvalReport report;
    report.manifest = std::move(manifest);
    report.empty_run = dataset.empty();
    std::vector<std::optional<Answer>> predictions;
    std::vector<Answer> gold;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& outcome = outcomes[i];
        EvalReport::QueryOutcome row;
        row.id = dataset[i].id;
        row.predicted = outcome.final_answer;
        row.gold = dataset[i].gold_answer;
        row.failed = outcome.failed;
        row.iterations = static_cast<int>(outcome.iterations.size());
        row.resolution = outcome.failed ? "failed"
                         : outcome.resolution == Resolution::EarlyExit
                             ? "early_exit"
                             : "max_score_fallback";
        row.correct = outcome.final_answer &&
                      answers_equal(*outcome.final_answer, dataset[i].gold_answer);
        predictions.push_back(outcome.final_answer);
        gold.push_back(dataset[i].gold_answer);
        ++report.iteration_histogram[row.iterations];
        for (const auto& iteration : outcome.iterations) {
            for (const auto& fact : iteration.report.factualities) {
                switch (fact.method) {
                    case FactMethod::Exact: ++report.exact_count; break;
                    case FactMethod::Implicit: ++report.implicit_count; break;
                    case FactMethod::Unverifiable: ++report.unverifiable_count; break;
                }
            }
        }
        report.outcomes.push_back(std::move(row));
    }
    report.accuracy = dataset.empty() ? 0.0 : accuracy(predictions, gold);
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json doc;
    doc["accuracy"] = report.accuracy;
    doc["empty_run"] = report.empty_run;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [iterations, count] : report.iteration_histogram) {
        hist[std::to_string(iterations)] = count;
    }
    doc["iteration_histogram"] = hist;
    doc["manifest"] = report.manifest;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.outcomes) {
        nlohmann::json r;
        r["id"] = row.id;
        r["predicted"] =
            row.predicted ? nlohmann::json(render_answer_value(*row.predicted))
                          : nlohmann::json(nullptr);
        r["gold"] = render_answer_value(row.gold);
        r["correct"] = row.correct;
        r["failed"] = row.failed;
        r["resolution"] = row.resolution;
        r["iterations"] = row.iterations;
        rows.push_back(std::move(r));
    }
    doc["outcomes"] = rows;
    doc["verification_counts"] = {{"exact", report.exact_count},
                                  {"implicit", report.implicit_count},
                                  {"unverifiable", report.unverifiable_count}};
    return doc;
}

inline void write_report_table(const EvalReport& report, std::ostream& out) {
    out << "accuracy: " << report.accuracy;
    if (report.empty_run) out << " (empty run)";
    out << "\n";
    out << "verification: exact=" << report.exact_count
        << " implicit=" << report.implicit_count
        << " unverifiable=" << report.unverifiable_count << "\n";
    out << "iterations histogram:";
    for (const auto& [iterations, count] : report.iteration_histogram) {
        out << " " << iterations << "->" << count;
    }
    out << "\n";
    out << std::left << std::setw(24) << "id" << std::setw(12) << "predicted"
        << std::setw(12) << "gold" << std::setw(9) << "correct" << std::setw(20)
        << "resolution"
        << "iters\n";
    for (const auto& row : report.outcomes) {
        out << std::left << std::setw(24) << row.id << std::setw(12)
            << (row.predicted ? render_answer_value(*row.predicted) : "-")
            << std::setw(12) << render_answer_value(row.gold) << std::setw(9)
            << (row.correct ? "yes" : "no") << std::setw(20) << row.resolution
            << row.iterations << "\n";
    }
}

// Writes the machine-readable report to `path` and a human-readable table to
// `path` + ".txt". Report bytes are a pure function of outcomes + manifest.
inline EvalReport emit_report(const std::vector<RethinkOutcome>& outcomes,
                              const std::vector<DatasetRecord>& dataset,
                              const std::string& path, nlohmann::json manifest) {
    EvalReport report = build_report(outcomes, dataset, std::move(manifest));
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write report " + path);
        out << report_to_json(report).dump(2) << '\n';
        if (!out) throw DataError("short write to " + path);
    }
    {
        std::ofstream out(path + ".txt", std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write report table " + path + ".txt");
        write_report_table(report, out);
    }
    return report;
}

// Audit trace: one JSON line per iteration with the prompt hash, the parsed
// chain, scores, and injected knowledge.
inline void write_trace(const std::vector<RethinkOutcome>& outcomes,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write trace " + path);
    for (const auto& outcome : outcomes) {
        for (const auto& record : outcome.iterations) {
            nlohmann::json doc;
            doc["query_id"] = outcome.query_id;
            doc["iteration"] = record.iteration;
            doc["prompt_hash"] = fnv1a64(record.prompt);
            nlohmann::json triples = nlohmann::json::array();
            for (const auto& fact : record.report.factualities) {
                triples.push_back({{"triple", fact.triple.render()},
                                   {"score", fact.score},
                                   {"method", std::string(fact_method_name(fact.method))}});
            }
            doc["factualities"] = triples;
            doc["faithfulness"] = record.report.faithfulness;
            doc["combined"] = record.report.combined;
            doc["answer"] = record.chain.answer
                                ? nlohmann::json(render_answer_value(*record.chain.answer))
                                : nlohmann::json(nullptr);
            nlohmann::json injected = nlohmann::json::array();
            for (const auto& t : record.injected) injected.push_back(t.render());
            doc["injected"] = injected;
            out << doc.dump() << '\n';
        }
    }
    if (!out) throw DataError("short write to " + path);
}

}  // namespace cok
