#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cok/embedding.hpp"
#include "cok/encoder.hpp"
#include "cok/errors.hpp"
#include "cok/kb.hpp"
#include "cok/parse.hpp"
#include "cok/triple.hpp"

namespace cok {

enum class FactMethod { Exact, Implicit, Unverifiable };

inline std::string_view fact_method_name(FactMethod m) {
    switch (m) {
        case FactMethod::Exact: return "exact";
        case FactMethod::Implicit: return "implicit";
        case FactMethod::Unverifiable: return "unverifiable";
    }
    return "unknown";
}

struct FactualityResult {
    double score = 0.5;
    FactMethod method = FactMethod::Unverifiable;
    Triple triple;
    LinkResult subject_link;
    LinkResult relation_link;
    LinkResult object_link;
};

inline constexpr double kDefaultGamma = 0.5;
inline constexpr double kUnverifiableScore = 0.5;

// gamma * mean(f_v) + (1 - gamma) * f_u; an empty triple list contributes 0,
// so a response without evidence looks unreliable.
inline double reliability(const std::vector<double>& factuality_scores,
                          double faithfulness, double gamma) {
    if (gamma <= 0.0 || gamma >= 1.0) {
        throw ConfigError("reliability: gamma must lie in (0, 1)");
    }
    if (faithfulness < 0.0 || faithfulness > 1.0) {
        throw ConfigError("reliability: faithfulness must lie in [0, 1]");
    }
    double mean = 0.0;
    if (!factuality_scores.empty()) {
        double sum = 0.0;
        for (double v : factuality_scores) sum += v;
        mean = sum / static_cast<double>(factuality_scores.size());
    }
    return gamma * mean + (1.0 - gamma) * faithfulness;
}

inline double reliability(const std::vector<FactualityResult>& factualities,
                          double faithfulness, double gamma) {
    std::vector<double> scores;
    scores.reserve(factualities.size());
    for (const auto& f : factualities) scores.push_back(f.score);
    return reliability(scores, faithfulness, gamma);
}

// Similarity between the generated explanation and the concatenation of
// query, rendered triples (one per line) and the answer sentence. Cosine is
// clamped at zero: negative similarity means unfaithful, not half-faithful.
inline std::string render_faithfulness_reference(std::string_view query,
                                                 const std::vector<Triple>& triples,
                                                 std::string_view answer_value) {
    std::string out(query);
    for (const auto& t : triples) {
        out.push_back('\n');
        out.append(t.render());
    }
    out.push_back('\n');
    out.append("So the answer is ");
    out.append(answer_value);
    out.push_back('.');
    return out;
}

inline double faithfulness(const TextEncoder& encoder, std::string_view query,
                           const std::vector<Triple>& triples,
                           std::string_view answer_value,
                           std::string_view explanation) {
    const std::string reference =
        render_faithfulness_reference(query, triples, answer_value);
    const double cos = encoder.encode(reference).dot(encoder.encode(explanation));
    // unit vectors can overshoot 1 by rounding
    return std::clamp(cos, 0.0, 1.0);
}

// Unigram multiset F1 between two token lists; 0 when either side is empty.
inline double kf1_from_tokens(const std::vector<std::string>& explanation_tokens,
                              const std::vector<std::string>& knowledge_tokens) {
    if (explanation_tokens.empty() || knowledge_tokens.empty()) return 0.0;
    std::map<std::string, int> expl_counts;
    for (const auto& tok : explanation_tokens) ++expl_counts[tok];
    std::map<std::string, int> know_counts;
    for (const auto& tok : knowledge_tokens) ++know_counts[tok];
    std::size_t overlap = 0;
    for (const auto& [tok, n] : expl_counts) {
        auto it = know_counts.find(tok);
        if (it != know_counts.end()) {
            overlap += static_cast<std::size_t>(std::min(n, it->second));
        }
    }
    const double precision =
        static_cast<double>(overlap) / static_cast<double>(explanation_tokens.size());
    const double recall =
        static_cast<double>(overlap) / static_cast<double>(knowledge_tokens.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// Knowledge F1: token overlap between the explanation and the rendered
// triples (lowercased, punctuation-stripped).
inline double kf1(std::string_view explanation, const std::vector<Triple>& triples) {
    std::vector<std::string> knowledge_tokens;
    for (const auto& t : triples) {
        for (auto& tok : tokenize_words(t.render())) {
            knowledge_tokens.push_back(std::move(tok));
        }
    }
    return kf1_from_tokens(tokenize_words(explanation), knowledge_tokens);
}

struct ReliabilityReport {
    std::vector<FactualityResult> factualities;
    double faithfulness = 0.0;
    double gamma = kDefaultGamma;
    double combined = 0.0;
};

// Joins exact and implicit verification: membership wins outright, otherwise
// the embedding model scores the triple, and an ungroundable triple stays
// neutral at 0.5.
class Verifier {
public:
    Verifier(const KnowledgeBase& kb, const TextEncoder& encoder,
             const EmbeddingModel* model = nullptr,
             double link_threshold = kDefaultLinkThreshold)
        : kb_(&kb), encoder_(&encoder) {
        if (model != nullptr) {
            scorer_.emplace(*model, encoder, link_threshold, kb.aliases());
        }
    }

    FactualityResult factuality(const Triple& t) const {
        FactualityResult out;
        out.triple = t;
        if (kb_->contains(t)) {
            out.score = 1.0;
            out.method = FactMethod::Exact;
            return out;
        }
        if (scorer_) {
            const ImplicitResult r = scorer_->score(t);
            out.subject_link = r.subject_link;
            out.relation_link = r.relation_link;
            out.object_link = r.object_link;
            if (!r.unverifiable) {
                out.score = r.score;
                out.method = FactMethod::Implicit;
                return out;
            }
        }
        out.score = kUnverifiableScore;
        out.method = FactMethod::Unverifiable;
        return out;
    }

    ReliabilityReport assess(std::string_view query, const ReasoningChain& chain,
                             double gamma = kDefaultGamma) const {
        ReliabilityReport report;
        report.gamma = gamma;
        for (const auto& t : chain.evidence_triples) {
            report.factualities.push_back(factuality(t));
        }
        const std::string answer_value =
            chain.answer ? render_answer_inline(*chain.answer) : std::string();
        report.faithfulness = cok::faithfulness(*encoder_, query, chain.evidence_triples,
                                                answer_value, chain.explanation);
        report.combined = reliability(report.factualities, report.faithfulness, gamma);
        return report;
    }

    const KnowledgeBase& kb() const { return *kb_; }
    const TextEncoder& encoder() const { return *encoder_; }
    bool has_model() const { return scorer_.has_value(); }

private:
    const KnowledgeBase* kb_;
    const TextEncoder* encoder_;
    std::optional<ImplicitScorer> scorer_;
};

}  // namespace cok
