#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "cok/dataset.hpp"
#include "cok/errors.hpp"
#include "cok/exemplar.hpp"
#include "cok/kb.hpp"
#include "cok/llm.hpp"
#include "cok/parse.hpp"
#include "cok/prompt.hpp"
#include "cok/verify.hpp"

namespace cok {

struct RethinkConfig {
    int max_iterations = 3;               // N
    double threshold = 0.5;               // theta; 0 and 1 allowed for grid parity
    double gamma = kDefaultGamma;
    int corrections_per_triple = 2;       // k
    int max_injected_per_iteration = 6;
    std::optional<int> self_consistency;  // n samples when set
    PromptVariant variant = PromptVariant::FullCoK;
    DecodingParams decoding;

    void validate() const {
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
        if (threshold < 0.0 || threshold > 1.0) {
            throw ConfigError("threshold must lie in [0, 1]");
        }
        if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in (0, 1)");
        if (corrections_per_triple < 1) {
            throw ConfigError("corrections_per_triple must be >= 1");
        }
        if (max_injected_per_iteration < 0) {
            throw ConfigError("max_injected_per_iteration must be >= 0");
        }
        decoding.validate();
        if (self_consistency) {
            if (*self_consistency < 2) {
                throw ConfigError("self_consistency needs at least 2 samples");
            }
            if (decoding.temperature <= 0.0) {
                throw ConfigError("self_consistency requires temperature > 0");
            }
        }
    }

    // theta = 1 never early-exits; theta = 0 accepts everything immediately.
    bool accepts(double combined) const {
        return threshold < 1.0 && combined >= threshold;
    }
};

struct IterationRecord {
    int iteration = 0;  // 1-based
    std::string prompt;
    ReasoningChain chain;
    ReliabilityReport report;
    std::vector<Triple> injected;  // what this iteration added for the next one
};

enum class Resolution { EarlyExit, MaxScoreFallback };

struct RethinkOutcome {
    std::string query_id;
    std::vector<IterationRecord> iterations;
    std::optional<Answer> final_answer;
    Resolution resolution = Resolution::MaxScoreFallback;
    int resolved_iteration = 0;  // 1-based iteration the answer came from
    bool failed = false;
    std::string error;
};

struct RethinkContext {
    const std::vector<Exemplar>* exemplars = nullptr;
    const KnowledgeBase* kb = nullptr;
    const TextEncoder* encoder = nullptr;
    const Verifier* verifier = nullptr;
    LLMBackend* llm = nullptr;
    std::string model_name;
};

namespace detail {

// Corrections for every generated triple scoring below theta: k per triple,
// deduplicated against this batch and everything injected before, capped.
inline std::vector<Triple> collect_corrections(const RethinkContext& ctx,
                                               const RethinkConfig& config,
                                               const ReliabilityReport& report,
                                               std::unordered_set<std::string>& injected_keys) {
    std::vector<Triple> out;
    for (const auto& fact : report.factualities) {
        if (fact.score >= config.threshold) continue;
        const auto corrections = ctx.kb->find_corrections(
            fact.triple, config.corrections_per_triple, *ctx.encoder);
        for (const auto& corr : corrections) {
            if (static_cast<int>(out.size()) >= config.max_injected_per_iteration) {
                return out;
            }
            if (injected_keys.insert(ctx.kb->canonical_key(corr)).second) {
                out.push_back(corr);
            }
        }
    }
    return out;
}

struct SampledIteration {
    ReasoningChain chain;           // representative chain
    ReliabilityReport report;       // its report
    std::optional<Answer> answer;   // iteration answer (majority under SC)
};

// Scores every sampled chain, majority-votes the answer, and picks the
// highest-scoring chain among the majority voters as the representative.
inline SampledIteration pick_representative(const RethinkContext& ctx,
                                            const RethinkConfig& config,
                                            const DatasetRecord& query,
                                            const std::vector<std::string>& texts) {
    struct Scored {
        ReasoningChain chain;
        ReliabilityReport report;
    };
    std::vector<Scored> scored;
    scored.reserve(texts.size());
    for (const auto& text : texts) {
        Scored s;
        s.chain = parse_response(text, query.task_type);
        s.report = ctx.verifier->assess(query.question, s.chain, config.gamma);
        scored.push_back(std::move(s));
    }

    auto best_of = [&](const std::vector<std::size_t>& indices) {
        std::size_t best = indices.front();
        for (std::size_t idx : indices) {
            if (scored[idx].report.combined > scored[best].report.combined) best = idx;
        }
        return best;
    };

    // Group by answer equality; chains without an answer do not vote.
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (!scored[i].chain.answer) continue;
        bool placed = false;
        for (auto& group : groups) {
            if (answers_equal(*scored[group.front()].chain.answer,
                              *scored[i].chain.answer)) {
                group.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) groups.push_back({i});
    }

    SampledIteration out;
    if (groups.empty()) {
        std::vector<std::size_t> all(scored.size());
        for (std::size_t i = 0; i < scored.size(); ++i) all[i] = i;
        const std::size_t rep = best_of(all);
        out.chain = std::move(scored[rep].chain);
        out.report = std::move(scored[rep].report);
        return out;
    }
    std::size_t max_votes = 0;
    for (const auto& group : groups) max_votes = std::max(max_votes, group.size());
    // Ties between equally large groups go to the group holding the
    // highest-scoring chain.
    std::vector<std::size_t> winner;
    double winner_best = -1.0;
    for (const auto& group : groups) {
        if (group.size() != max_votes) continue;
        const double group_best = scored[best_of(group)].report.combined;
        if (group_best > winner_best) {
            winner_best = group_best;
            winner = group;
        }
    }
    const std::size_t rep = best_of(winner);
    out.answer = scored[rep].chain.answer;
    out.chain = std::move(scored[rep].chain);
    out.report = std::move(scored[rep].report);
    return out;
}

}  // namespace detail

// Thrown when the backend fails mid-query; carries the finished iterations.
class RethinkTransportError : public TransportError {
public:
    RethinkTransportError(const std::string& msg, std::vector<IterationRecord> partial)
        : TransportError(msg), partial_(std::move(partial)) {}
    const std::vector<IterationRecord>& partial_iterations() const { return partial_; }

private:
    std::vector<IterationRecord> partial_;
};

// One query through the generate -> verify -> inject loop: early exit at the
// first iteration whose combined score meets theta, otherwise the answer of
// the highest-scoring iteration (earliest on ties).
inline RethinkOutcome run_query(const RethinkContext& ctx, const DatasetRecord& query,
                                const RethinkConfig& config) {
    config.validate();
    if (ctx.exemplars == nullptr || ctx.exemplars->empty()) {
        throw ConfigError("run_query: at least one exemplar required");
    }

    RethinkOutcome outcome;
    outcome.query_id = query.id;

    DecodingParams params = config.decoding;
    if (config.self_consistency) params.n_samples = *config.self_consistency;

    std::string prompt = build_prompt(*ctx.exemplars,
                                      PromptQuery{query.question, query.choices},
                                      config.variant);
    std::unordered_set<std::string> injected_keys;

    for (int n = 1; n <= config.max_iterations; ++n) {
        GenerationRequest request{prompt, params, ctx.model_name};
        GenerationResponse response;
        try {
            response = ctx.llm->complete(request);
        } catch (const TransportError& e) {
            throw RethinkTransportError(
                "query " + query.id + " iteration " + std::to_string(n) + ": " +
                    e.what(),
                std::move(outcome.iterations));
        }

        detail::SampledIteration picked =
            detail::pick_representative(ctx, config, query, response.texts);

        IterationRecord record;
        record.iteration = n;
        record.prompt = prompt;
        record.chain = std::move(picked.chain);
        record.report = std::move(picked.report);

        if (config.accepts(record.report.combined)) {
            outcome.final_answer = record.chain.answer;
            outcome.resolution = Resolution::EarlyExit;
            outcome.resolved_iteration = n;
            outcome.iterations.push_back(std::move(record));
            return outcome;
        }

        if (n < config.max_iterations) {
            record.injected = detail::collect_corrections(ctx, config, record.report,
                                                          injected_keys);
            if (!record.injected.empty()) {
                prompt = extend_prompt(prompt, record.injected);
            }
        }
        outcome.iterations.push_back(std::move(record));
    }

    // Max-score fallback over the iteration log; earliest iteration on ties.
    std::size_t best = 0;
    for (std::size_t i = 1; i < outcome.iterations.size(); ++i) {
        if (outcome.iterations[i].report.combined >
            outcome.iterations[best].report.combined) {
            best = i;
        }
    }
    outcome.final_answer = outcome.iterations[best].chain.answer;
    outcome.resolution = Resolution::MaxScoreFallback;
    outcome.resolved_iteration = outcome.iterations[best].iteration;
    return outcome;
}

// Self-consistency entry point: per iteration, n sampled completions vote on
// the answer and the best-scoring majority chain drives scoring/injection.
inline RethinkOutcome run_query_sc(const RethinkContext& ctx, const DatasetRecord& query,
                                   RethinkConfig config,
                                   int n_samples = kDefaultSelfConsistencySamples) {
    config.self_consistency = n_samples;
    return run_query(ctx, query, config);
}

// Runs queries with a worker pool; outcomes come back in input order and
// per-query failures are recorded without stopping the run.
inline std::vector<RethinkOutcome> run_dataset(const RethinkContext& ctx,
                                               const std::vector<DatasetRecord>& queries,
                                               const RethinkConfig& config,
                                               int parallelism = 1) {
    config.validate();
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    std::vector<RethinkOutcome> outcomes(queries.size());
    if (queries.empty()) return outcomes;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= queries.size()) return;
            try {
                outcomes[i] = run_query(ctx, queries[i], config);
            } catch (const RethinkTransportError& e) {
                outcomes[i].query_id = queries[i].id;
                outcomes[i].iterations = e.partial_iterations();
                outcomes[i].failed = true;
                outcomes[i].error = e.what();
            } catch (const Error& e) {
                outcomes[i].query_id = queries[i].id;
                outcomes[i].failed = true;
                outcomes[i].error = e.what();
            }
        }
    };

    const int workers = std::min<int>(parallelism, static_cast<int>(queries.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return outcomes;
}

}  // namespace cok
