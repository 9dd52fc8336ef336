// Acceptance suite: runs every stated criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exits non-zero if any fail.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cok/cok.hpp"
#include "support/gradient_check.hpp"
#include "support/helpers.hpp"

using namespace cok;
using testsupport::TempDir;

namespace {

struct Failure {
    std::string what;
};

class Check {
public:
    void require(bool condition, const std::string& what) {
        if (!condition) failures_.push_back({what});
    }
    template <typename T>
    void equal(const T& got, const T& want, const std::string& what) {
        if (!(got == want)) {
            std::ostringstream os;
            os << what << " (got " << got << ", want " << want << ")";
            failures_.push_back({os.str()});
        }
    }
    const std::vector<Failure>& failures() const { return failures_; }

private:
    std::vector<Failure> failures_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

// ---------------------------------------------------------------- criterion 1

void criterion_reliability(Check& check) {
    const auto start = std::chrono::steady_clock::now();
    const double direct = reliability(std::vector<double>{1.0, 0.0}, 0.6, 0.5);
    check.require(direct == 0.5 * ((1.0 + 0.0) / 2.0) + (1.0 - 0.5) * 0.6,
                  "Eq-1 exact arithmetic");
    check.require(std::fabs(direct - 0.55) < 1e-15, "reliability([1,0],0.6,0.5) = 0.55");

    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> count(0, 8);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> scores(static_cast<std::size_t>(count(gen)));
        for (auto& s : scores) s = unit(gen);
        const double faith = unit(gen);
        const double gamma = 0.01 + 0.98 * unit(gen);
        const double base = reliability(scores, faith, gamma);
        if (base < 0.0 || base > 1.0) {
            check.require(false, "reliability out of [0,1]");
            return;
        }
        if (!scores.empty()) {
            auto bumped = scores;
            const std::size_t pick = gen() % scores.size();
            bumped[pick] = std::min(1.0, bumped[pick] + unit(gen) * (1.0 - bumped[pick]));
            if (reliability(bumped, faith, gamma) < base - 1e-12) {
                check.require(false, "reliability not monotone in factuality");
                return;
            }
        }
        const double faith_up = std::min(1.0, faith + unit(gen) * (1.0 - faith));
        if (reliability(scores, faith_up, gamma) < base - 1e-12) {
            check.require(false, "reliability not monotone in faithfulness");
            return;
        }
    }
    check.require(seconds_since(start) < 1.0, "criterion 1 under 1 second");
}

// ---------------------------------------------------------------- criterion 2

void criterion_energy_oracle(Check& check) {
    std::mt19937 gen(4242);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    const int d = 4;
    for (int trial = 0; trial < 1000; ++trial) {
        Vec s(d), r(d), c(d), o(d);
        std::vector<std::vector<double>> rows(d, std::vector<double>(d));
        Mat m(d, d);
        for (int i = 0; i < d; ++i) {
            s[i] = dist(gen);
            r[i] = dist(gen);
            c[i] = dist(gen);
            o[i] = dist(gen);
            for (int j = 0; j < d; ++j) {
                rows[i][j] = dist(gen);
                m(i, j) = rows[i][j];
            }
        }
        const double alpha = std::fabs(dist(gen)) + 0.05;
        const double want = testsupport::oracle_energy(s, r, c, o, rows, alpha);
        const double got = energy(s, r, c, o, m, alpha);
        const double rel = std::fabs(got - want) / std::max(std::fabs(want), 1e-300);
        if (rel > 1e-12) {
            check.require(false, "energy deviates from oracle by rel " +
                                     std::to_string(rel));
            return;
        }
        if (got < 0.0) {
            check.require(false, "energy negative");
            return;
        }
    }
}

// ---------------------------------------------------------------- criterion 3

void criterion_gradients(Check& check) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 gen(31337);
    int checked = 0;
    for (int trial = 0; trial < 500 && checked < 50; ++trial) {
        const int dim = 2 + static_cast<int>(gen() % 7);
        const int clusters = 1 + static_cast<int>(gen() % 3);
        auto model = testsupport::random_model(gen, dim, 6, 3, clusters);
        const int rel = static_cast<int>(gen() % 3);
        IdTriple pos{static_cast<int>(gen() % 6), rel, static_cast<int>(gen() % 6)};
        IdTriple neg = pos;
        ((gen() % 2) ? neg.head : neg.tail) = static_cast<int>(gen() % 6);
        if (neg.head == pos.head && neg.tail == pos.tail) continue;
        const int proto_pos = static_cast<int>(gen() % clusters);
        const int proto_neg = static_cast<int>(gen() % clusters);
        if (hinge_loss(model, pos, proto_pos, neg, proto_neg, 1.0) < 1e-3) continue;
        const auto result =
            testsupport::gradient_check(model, pos, proto_pos, neg, proto_neg, 1.0, 1e-5);
        if (!result.active) continue;
        if (result.worst() > 1e-4) {
            check.require(false,
                          "gradient relative error " + std::to_string(result.worst()));
            return;
        }
        ++checked;
    }
    check.require(checked >= 40, "enough active gradient cases (" +
                                     std::to_string(checked) + ")");
    check.require(seconds_since(start) < 30.0, "criterion 3 under 30 seconds");
}

// ---------------------------------------------------------------- criterion 4

std::vector<Triple> load_triples_file(const std::string& path) {
    auto kb = load_kb(path, "entity");
    return kb.triples();
}

void criterion_separation(Check& check) {
    const auto start = std::chrono::steady_clock::now();
    auto kb = load_kb(testsupport::data_path("synthetic/toy_kb.tsv"), "entity");
    check.equal(kb.size(), std::size_t{240}, "toy KB size");

    TrainConfig config;
    config.dim = 32;
    config.margin = 1.0;
    config.learning_rate = 0.1;
    config.epochs = 200;
    config.negatives_per_positive = 1;
    config.clusters_per_relation = 1;
    config.alpha = 0.1;
    config.seed = 7;
    const auto model = train(kb, config);

    HashedNgramEncoder encoder;
    ImplicitScorer scorer(model, encoder);
    auto mean_score = [&](const std::vector<Triple>& triples) {
        double sum = 0.0;
        for (const auto& t : triples) {
            const auto res = scorer.score(t);
            if (res.unverifiable) {
                check.require(false, "toy triple failed to link: " + t.render());
            }
            sum += res.score;
        }
        return sum / static_cast<double>(triples.size());
    };
    const auto true_triples =
        load_triples_file(testsupport::data_path("synthetic/toy_true.tsv"));
    const auto corrupted =
        load_triples_file(testsupport::data_path("synthetic/toy_corrupted.tsv"));
    check.equal(true_triples.size(), std::size_t{50}, "held-out true count");
    check.equal(corrupted.size(), std::size_t{50}, "corrupted count");

    const double mean_true = mean_score(true_triples);
    const double mean_corrupted = mean_score(corrupted);
    std::ostringstream os;
    os << "separation " << mean_true << " - " << mean_corrupted << " = "
       << (mean_true - mean_corrupted) << " < 0.15";
    check.require(mean_true - mean_corrupted >= 0.15, os.str());
    check.require(seconds_since(start) < 60.0, "criterion 4 under 60 seconds");
}

// ---------------------------------------------------------------- criterion 5

void criterion_exact_verification(Check& check) {
    std::mt19937 gen(555);
    std::uniform_int_distribution<int> word(0, 120);
    auto make = [&](const char* prefix, int n) {
        return std::string(prefix) + std::to_string(n);
    };
    std::string lines;
    std::vector<std::array<std::string, 3>> raw;
    std::set<std::string> oracle;
    while (raw.size() < 1000) {
        std::array<std::string, 3> fields = {make("subj", word(gen)),
                                             make("rel", word(gen) % 17),
                                             make("obj", word(gen))};
        raw.push_back(fields);
        lines += fields[0] + "\t" + fields[1] + "\t" + fields[2] + "\n";
        oracle.insert(testsupport::oracle_triple_key(fields[0], fields[1], fields[2]));
    }
    TempDir dir("fuzzkb");
    const std::string path = dir.file("kb.tsv");
    testsupport::write_text_file(path, lines);
    auto kb = load_kb(path, "entity");
    check.equal(kb.size(), oracle.size(), "KB size equals deduplicated lines");

    std::uniform_int_distribution<int> mode(0, 3);
    for (int i = 0; i < 10000; ++i) {
        std::array<std::string, 3> q;
        if (mode(gen) != 0) {
            q = raw[static_cast<std::size_t>(gen() % raw.size())];
        } else {
            q = {make("subj", word(gen)), make("rel", word(gen) % 17),
                 make("obj", word(gen))};
        }
        const bool expected =
            oracle.count(testsupport::oracle_triple_key(q[0], q[1], q[2])) != 0;
        std::string s = q[0];
        std::string r = q[1];
        std::string o = q[2];
        if (mode(gen) == 1) s = "  " + s + "  ";
        if (mode(gen) == 2) {
            for (auto& ch : r) {
                ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            }
        }
        const auto triple = Triple::normalized(s, r, o);
        if (!triple) {
            check.require(false, "fuzz query failed to normalize");
            return;
        }
        if (kb.contains(*triple) != expected) {
            check.require(false, "membership mismatch on " + triple->render());
            return;
        }
    }
}

// ---------------------------------------------------------------- criterion 6

void criterion_retrieval(Check& check) {
    std::mt19937 gen(777);
    std::uniform_int_distribution<int> word(0, 60);
    std::string lines;
    for (int i = 0; i < 240; ++i) {
        lines += "s" + std::to_string(word(gen)) + "\tr" + std::to_string(word(gen) % 6) +
                 "\to" + std::to_string(word(gen)) + "\n";
    }
    TempDir dir("mips");
    const std::string path = dir.file("kb.tsv");
    testsupport::write_text_file(path, lines);
    auto kb = load_kb(path, "entity");
    check.require(kb.size() >= 200, "similarity KB has at least 200 triples");

    HashedNgramEncoder enc;
    for (int q = 0; q < 100; ++q) {
        const std::string query = "s" + std::to_string(word(gen)) + " with o" +
                                  std::to_string(word(gen)) + " and r" +
                                  std::to_string(word(gen) % 6);
        const int k = 5;
        const auto got = kb.retrieve_similar(query, k, enc);

        const auto qv = enc.encode(query);
        std::vector<std::pair<double, Triple>> oracle;
        for (const auto& t : kb.triples()) {
            oracle.emplace_back(qv.dot(enc.encode(t.render())), t);
        }
        std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return lex_less(a.second, b.second);
        });
        if (got.size() != static_cast<std::size_t>(k)) {
            check.require(false, "retrieve_similar returned wrong count");
            return;
        }
        for (int i = 0; i < k; ++i) {
            if (!(got[static_cast<std::size_t>(i)].first ==
                  oracle[static_cast<std::size_t>(i)].second)) {
                check.require(false, "retrieval order differs from oracle at rank " +
                                         std::to_string(i));
                return;
            }
        }
    }
}

// ---------------------------------------------------------------- criterion 7

void criterion_parser_golden(Check& check) {
    const std::vector<std::pair<std::string, std::size_t>> fixtures = {
        {"letter.jsonl", 4},     {"coin.jsonl", 8},       {"sports.jsonl", 6},
        {"arc_c.jsonl", 8},      {"csqa.jsonl", 8},       {"aqua.jsonl", 8},
        {"gsm8k.jsonl", 8},      {"multiarith.jsonl", 8}, {"svamp.jsonl", 8},
        {"boolq.jsonl", 6},      {"strategyqa.jsonl", 6}, {"openbookqa.jsonl", 8},
    };
    for (const auto& [file, count] : fixtures) {
        const auto exemplars = load_exemplars(testsupport::data_path("exemplars/" + file));
        check.equal(exemplars.size(), count, file + " exemplar count");
        for (const auto& ex : exemplars) {
            const std::string block = render_answer_block(ex, PromptVariant::FullCoK);
            const auto chain = parse_response(block, ex.task_type);
            if (!chain.warnings.empty()) {
                check.require(false, file + ": warnings parsing \"" + ex.question + "\"");
                continue;
            }
            const bool fields_ok = chain.evidence_triples == ex.evidence_triples &&
                                   chain.explanation == ex.explanation &&
                                   chain.answer.has_value() &&
                                   answers_equal(*chain.answer, ex.answer);
            if (!fields_ok) {
                check.require(false, file + ": lossy parse of \"" + ex.question + "\"");
                continue;
            }
            const auto again = parse_response(render_chain(chain), ex.task_type);
            if (!(again == chain)) {
                check.require(false, file + ": render_chain round-trip failed");
            }
        }
    }

    // fuzz: arbitrary bytes never abort the parser
    std::mt19937 gen(90210);
    std::uniform_int_distribution<int> len(0, 300);
    std::uniform_int_distribution<int> byte(0, 255);
    const TaskType tasks[] = {TaskType::MultiChoice, TaskType::YesNo, TaskType::Numeric,
                              TaskType::StringConcat};
    for (int i = 0; i < 100000; ++i) {
        std::string s;
        const int n = len(gen);
        s.reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) s.push_back(static_cast<char>(byte(gen)));
        try {
            (void)parse_response(s, tasks[i % 4]);
        } catch (...) {
            check.require(false, "parser aborted on fuzz case " + std::to_string(i));
            return;
        }
    }
}

// ---------------------------------------------------------------- criterion 8

// Scripted case-study responses; iteration 1 is wrong, iteration 2 corrected.
const char* kFerretWrong =
    "A: Evidence triples:\n"
    "1. (ferret, isA, animal)\n"
    "2. (country, isA, place)\n"
    "3. (ferret, popular, Britain)\n"
    "4. (north carolina, located in, Britain)\n"
    "Explanation hints: The answer must be a place where ferrets are popular. Of the "
    "above choices, only North Carolina is a place where ferrets are popular.\n"
    "So the answer is (D).\n";

const char* kFerretRight =
    "A: Evidence triples:\n"
    "1. (ferret, isA, animal)\n"
    "2. (country, isA, place)\n"
    "3. (ferret, popular, Great Britain)\n"
    "4. (Great Britain, located in, Britain)\n"
    "Explanation hints: The answer must be a place where ferrets are popular. Of the "
    "above choices, only Great Britain is a place where ferrets are popular.\n"
    "So the answer is (C).\n";

const char* kPrinceWrong =
    "A: Evidence triples:\n"
    "1. (Prince, last latter, e)\n"
    "2. (Rene, last latter, e)\n"
    "3. (Vishal, last latter, i)\n"
    "4. (Patrick, last latter, k)\n"
    "5. (final answer, is, eeik)\n"
    "Explanation hints: The last letter of \"Prince\" is \"e\". The last letter of "
    "\"Rene\" is \"e\". The last letter of \"Vishal\" is \"i\". The last letter of "
    "\"Patrick\" is \"k\". Concatenating them is \"eeik\".\n"
    "So the answer is eeik.\n";

const char* kPrinceRight =
    "A: Evidence triples:\n"
    "1. (Prince, last latter, e)\n"
    "2. (Rene, last latter, e)\n"
    "3. (Vishal, last latter, l)\n"
    "4. (Patrick, last latter, k)\n"
    "5. (final answer, is, eelk)\n"
    "Explanation hints: The last letter of \"Prince\" is \"e\". The last letter of "
    "\"Rene\" is \"e\". The last letter of \"Vishal\" is \"l\". The last letter of "
    "\"Patrick\" is \"k\". Concatenating them is \"eelk\".\n"
    "So the answer is eelk.\n";

// Pinned between the scripted wrong iterations' scores (0.557, 0.663) and
// the corrected ones' (0.706, 0.712) under the default encoder.
constexpr double kCaseStudyTheta = 0.69;

struct CaseStudyEnv {
    KnowledgeBase kb = load_kb_manifest(testsupport::data_path("kb/manifest.json"));
    HashedNgramEncoder encoder;
    Verifier verifier{kb, encoder};
    std::vector<Exemplar> exemplars =
        load_exemplars(testsupport::data_path("exemplars/letter.jsonl"));
    std::vector<DatasetRecord> dataset =
        load_dataset(testsupport::data_path("datasets/casestudy.jsonl"));

    RethinkConfig config(int iterations) const {
        RethinkConfig c;
        c.max_iterations = iterations;
        c.threshold = kCaseStudyTheta;
        return c;
    }

    RethinkContext context(MockBackend& llm) {
        RethinkContext ctx;
        ctx.exemplars = &exemplars;
        ctx.kb = &kb;
        ctx.encoder = &encoder;
        ctx.verifier = &verifier;
        ctx.llm = &llm;
        return ctx;
    }
};

void criterion_case_study(Check& check) {
    CaseStudyEnv env;
    check.equal(env.dataset.size(), std::size_t{2}, "case-study dataset size");

    // rethinking disabled: one iteration, wrong answers stay
    MockBackend disabled;
    disabled.script({kFerretWrong});
    disabled.script({kPrinceWrong});
    auto ctx = env.context(disabled);
    const auto base = run_dataset(ctx, env.dataset, env.config(1), 1);
    std::vector<std::optional<Answer>> base_pred;
    std::vector<Answer> gold;
    for (std::size_t i = 0; i < base.size(); ++i) {
        base_pred.push_back(base[i].final_answer);
        gold.push_back(env.dataset[i].gold_answer);
    }
    check.equal(accuracy(base_pred, gold), 0.0, "rethinking disabled scores 0/2");

    // rethinking enabled: injection corrects both within N = 2
    MockBackend enabled;
    enabled.script({kFerretWrong});
    enabled.script({kFerretRight});
    enabled.script({kPrinceWrong});
    enabled.script({kPrinceRight});
    auto ctx2 = env.context(enabled);
    const auto rethought = run_dataset(ctx2, env.dataset, env.config(2), 1);
    std::vector<std::optional<Answer>> pred;
    for (const auto& outcome : rethought) pred.push_back(outcome.final_answer);
    check.equal(accuracy(pred, gold), 1.0, "rethinking enabled scores 2/2");

    check.require(rethought[1].resolution == Resolution::EarlyExit,
                  "letters query resolves by early exit");
    check.equal(rethought[1].resolved_iteration, 2, "letters flip happens at n=2");
    check.require(rethought[1].final_answer.has_value(), "letters answer present");
    if (rethought[1].final_answer) {
        check.equal(std::get<TextAnswer>(*rethought[1].final_answer).value,
                    std::string("eelk"), "eeik flips to eelk");
    }
    const auto& injected = rethought[1].iterations.at(0).injected;
    bool vishal_injected = false;
    for (const auto& t : injected) {
        vishal_injected |= fold_key(t.subject) == "vishal" && fold_key(t.object) == "l";
    }
    check.require(vishal_injected, "the Vishal correction triple is injected");

    // the scripted scores straddle the pinned threshold on both queries
    for (const auto& outcome : rethought) {
        check.require(outcome.iterations.size() == 2, "two iterations per query");
        check.require(outcome.iterations[0].report.combined < kCaseStudyTheta,
                      "wrong iteration scores below theta");
        check.require(outcome.iterations[1].report.combined >= kCaseStudyTheta,
                      "corrected iteration reaches theta");
    }
}

// ---------------------------------------------------------------- criterion 9

std::string algo_response(const DatasetRecord& query, int hits, int total,
                          bool faithful, const std::string& answer_value) {
    std::vector<Triple> triples;
    for (int i = 0; i < hits; ++i) {
        triples.push_back(*Triple::normalized("h" + std::to_string(i), "rel",
                                              "t" + std::to_string(i)));
    }
    for (int i = hits; i < total; ++i) {
        triples.push_back(*Triple::normalized("m" + std::to_string(i), "none",
                                              "x" + std::to_string(i)));
    }
    std::string out = "Evidence triples:\n";
    for (std::size_t i = 0; i < triples.size(); ++i) {
        out += std::to_string(i + 1) + ". " + triples[i].render() + "\n";
    }
    out += "Explanation hints: ";
    out += faithful
               ? render_faithfulness_reference(query.question, triples, answer_value)
               : std::string("zzzzzz");
    out += "\nSo the answer is " + answer_value + ".\n";
    return out;
}

void criterion_algorithm_semantics(Check& check) {
    std::string lines;
    for (int i = 0; i < 10; ++i) {
        lines += "h" + std::to_string(i) + "\trel\tt" + std::to_string(i) + "\n";
    }
    TempDir dir("algokb");
    testsupport::write_text_file(dir.file("kb.tsv"), lines);
    auto kb = load_kb(dir.file("kb.tsv"), "entity");
    HashedNgramEncoder encoder;
    Verifier verifier(kb, encoder);

    Exemplar ex;
    ex.question = "Is h0 related to t0?";
    ex.evidence_triples = {*Triple::normalized("h0", "rel", "t0")};
    ex.explanation = "h0 relates to t0.";
    ex.answer = Answer{YesNoAnswer{true}};
    ex.task_type = TaskType::YesNo;
    const std::vector<Exemplar> exemplars = {ex};

    DatasetRecord query;
    query.id = "q";
    query.question = "Does the relation hold?";
    query.gold_answer = Answer{YesNoAnswer{true}};
    query.task_type = TaskType::YesNo;

    auto make_ctx = [&](MockBackend& llm) {
        RethinkContext ctx;
        ctx.exemplars = &exemplars;
        ctx.kb = &kb;
        ctx.encoder = &encoder;
        ctx.verifier = &verifier;
        ctx.llm = &llm;
        return ctx;
    };

    // early exit at the first C >= theta; later responses never consumed
    {
        MockBackend llm;
        llm.script({algo_response(query, 2, 5, false, "no")});   // C = 0.35
        llm.script({algo_response(query, 4, 5, true, "yes")});   // C = 0.95
        llm.script({algo_response(query, 0, 5, false, "no")});
        RethinkConfig config;
        config.max_iterations = 3;
        config.threshold = 0.9;
        auto ctx = make_ctx(llm);
        const auto outcome = run_query(ctx, query, config);
        check.require(outcome.resolution == Resolution::EarlyExit, "early exit fires");
        check.equal(outcome.resolved_iteration, 2, "early exit at first C >= theta");
        check.equal(llm.request_count(), 2L, "no generation after the exit");
    }

    // fallback equals brute-force argmax over the iteration log
    {
        MockBackend llm;
        llm.script({algo_response(query, 1, 5, false, "no")});   // 0.30
        llm.script({algo_response(query, 3, 5, false, "yes")});  // 0.40
        llm.script({algo_response(query, 2, 5, false, "no")});   // 0.35
        RethinkConfig config;
        config.max_iterations = 3;
        config.threshold = 0.99;
        auto ctx = make_ctx(llm);
        const auto outcome = run_query(ctx, query, config);
        check.require(outcome.resolution == Resolution::MaxScoreFallback,
                      "fallback after N iterations");
        std::size_t best = 0;
        for (std::size_t i = 1; i < outcome.iterations.size(); ++i) {
            if (outcome.iterations[i].report.combined >
                outcome.iterations[best].report.combined) {
                best = i;
            }
        }
        check.equal(outcome.resolved_iteration, outcome.iterations[best].iteration,
                    "fallback is the argmax iteration");
        check.equal(outcome.resolved_iteration, 2, "argmax lands on iteration 2");
        check.require(outcome.final_answer.has_value() &&
                          std::get<YesNoAnswer>(*outcome.final_answer).value,
                      "fallback answer from the argmax iteration");
        check.equal(llm.request_count(), 3L, "exactly N generation calls");
    }

    // bounded calls under self-consistency: requests <= N, completions <= N*n
    {
        MockBackend llm;
        RethinkConfig config;
        config.max_iterations = 2;
        config.threshold = 0.99;
        config.decoding.temperature = 0.7;
        config.self_consistency = 3;
        for (int it = 0; it < 2; ++it) {
            llm.script({algo_response(query, 1, 5, false, "no"),
                        algo_response(query, 2, 5, false, "no"),
                        algo_response(query, 3, 5, false, "yes")});
        }
        auto ctx = make_ctx(llm);
        const auto outcome = run_query(ctx, query, config);
        check.equal(outcome.iterations.size(), std::size_t{2}, "SC runs N iterations");
        check.require(llm.request_count() <= 2, "SC requests bounded by N");
        check.require(llm.completion_count() <= 2 * 3, "SC completions bounded by N*n");
    }

    // the full exploration grid is accepted
    {
        RethinkConfig config;
        bool all_ok = true;
        for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            for (int n = 1; n <= 5; ++n) {
                config.threshold = theta;
                config.max_iterations = n;
                try {
                    config.validate();
                } catch (const Error&) {
                    all_ok = false;
                }
            }
        }
        check.require(all_ok, "theta {0,.25,.5,.75,1} x N {1..5} all accepted");

        // boundary semantics
        MockBackend llm;
        llm.script({algo_response(query, 0, 5, false, "no")});  // C = 0.25
        RethinkConfig zero;
        zero.max_iterations = 3;
        zero.threshold = 0.0;
        auto ctx = make_ctx(llm);
        const auto accepted = run_query(ctx, query, zero);
        check.require(accepted.resolution == Resolution::EarlyExit &&
                          accepted.resolved_iteration == 1,
                      "theta 0 accepts iteration 1");

        MockBackend llm2;
        llm2.script({algo_response(query, 5, 5, true, "yes")});  // C = 1.0
        llm2.script({algo_response(query, 5, 5, true, "yes")});
        RethinkConfig one;
        one.max_iterations = 2;
        one.threshold = 1.0;
        auto ctx2 = make_ctx(llm2);
        const auto never = run_query(ctx2, query, one);
        check.require(never.resolution == Resolution::MaxScoreFallback,
                      "theta 1 never early-exits even at C = 1");
    }
}

// --------------------------------------------------------------- criterion 10

void criterion_paper_constants(Check& check) {
    RethinkConfig rethink;
    check.equal(rethink.gamma, 0.5, "gamma defaults to 0.5");
    DecodingParams decoding;
    check.equal(decoding.temperature, 0.0, "temperature defaults to 0");
    check.equal(decoding.max_tokens, 512, "max tokens defaults to 512");
    check.equal(kDefaultSelfConsistencySamples, 10, "self-consistency defaults to 10");

    const std::vector<std::pair<std::string, std::size_t>> counts = {
        {"csqa.jsonl", 8},      {"openbookqa.jsonl", 8}, {"arc_c.jsonl", 8},
        {"coin.jsonl", 8},      {"aqua.jsonl", 8},       {"gsm8k.jsonl", 8},
        {"multiarith.jsonl", 8}, {"svamp.jsonl", 8},     {"strategyqa.jsonl", 6},
        {"sports.jsonl", 6},    {"boolq.jsonl", 6},      {"letter.jsonl", 4},
    };
    for (const auto& [file, count] : counts) {
        const auto exemplars = load_exemplars(testsupport::data_path("exemplars/" + file));
        check.equal(exemplars.size(), count, file + " ships the stated exemplar count");
    }
}

// --------------------------------------------------------------- criterion 11

void criterion_perturbation_impl(Check& check) {
    auto kb = load_kb_manifest(testsupport::data_path("kb/manifest.json"));
    const auto exemplars =
        load_exemplars(testsupport::data_path("exemplars/letter.jsonl"));
    std::size_t total = 0;
    for (const auto& ex : exemplars) total += ex.evidence_triples.size();
    check.equal(total, std::size_t{12}, "letter fixtures carry 12 triples");

    for (double beta : {0.0, 25.0, 50.0, 75.0, 100.0}) {
        const auto expected = static_cast<std::size_t>(
            std::llround(beta / 100.0 * static_cast<double>(total)));
        const auto a = perturb_exemplars(exemplars, beta, kb, 4242);
        const auto b = perturb_exemplars(exemplars, beta, kb, 4242);
        std::size_t changed = 0;
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            if (!(a[i].evidence_triples == b[i].evidence_triples)) {
                check.require(false, "perturbation not seed-deterministic");
                return;
            }
            if (a[i].explanation != exemplars[i].explanation) {
                check.require(false, "perturbation touched an explanation");
                return;
            }
            for (std::size_t j = 0; j < exemplars[i].evidence_triples.size(); ++j) {
                changed +=
                    !(a[i].evidence_triples[j] == exemplars[i].evidence_triples[j]);
            }
        }
        // replacements come from the KB, so a replaced slot differs from the
        // original unless the draw collides; with this KB and these seeds the
        // counts must be exact
        std::ostringstream os;
        os << "beta " << beta << " replaces exactly " << expected << " (got " << changed
           << ")";
        check.require(changed == expected, os.str());
    }
}

// --------------------------------------------------------------- criterion 12

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

void criterion_replay_determinism(Check& check) {
#ifndef COK_CLI_PATH
    check.require(false, "CLI path not configured");
#else
    CaseStudyEnv env;
    TempDir dir("replay");
    const std::string log = dir.file("run.log");

    // record the scripted case-study run
    {
        MockBackend mock;
        mock.script({kFerretWrong});
        mock.script({kFerretRight});
        mock.script({kPrinceWrong});
        mock.script({kPrinceRight});
        RecordingBackend recorder(mock, log);
        auto ctx = env.context(mock);
        ctx.llm = &recorder;
        const auto outcomes = run_dataset(ctx, env.dataset, env.config(2), 1);
        check.equal(outcomes.size(), std::size_t{2}, "recorded run covers both queries");
    }

    auto invoke = [&](const std::string& report) {
        std::string cmd = shell_quote(COK_CLI_PATH);
        cmd += " run --dataset " + shell_quote(testsupport::data_path("datasets/casestudy.jsonl"));
        cmd += " --exemplars " + shell_quote(testsupport::data_path("exemplars/letter.jsonl"));
        cmd += " --manifest " + shell_quote(testsupport::data_path("kb/manifest.json"));
        cmd += " --replay " + shell_quote(log);
        cmd += " --report " + shell_quote(report);
        cmd += " --max-iterations 2 --threshold " + std::to_string(kCaseStudyTheta);
        cmd += " > /dev/null";
        return std::system(cmd.c_str());
    };
    const std::string r1 = dir.file("r1.json");
    const std::string r2 = dir.file("r2.json");
    check.equal(invoke(r1), 0, "first CLI run succeeds");
    check.equal(invoke(r2), 0, "second CLI run succeeds");
    const std::string b1 = read_file_bytes(r1);
    const std::string b2 = read_file_bytes(r2);
    check.require(!b1.empty(), "report is non-empty");
    check.require(b1 == b2, "reports are byte-identical");

    const auto doc = nlohmann::json::parse(b1);
    check.require(doc["accuracy"].get<double>() == 1.0,
                  "replayed case study scores 2/2");
#endif
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        std::string description;
        std::function<void(Check&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "Eq-1 reliability: exact value, range, monotonicity (< 1s)",
         criterion_reliability},
        {2, "energy formula matches an independent oracle to 1e-12",
         criterion_energy_oracle},
        {3, "analytic hinge gradients match finite differences to 1e-4 (< 30s)",
         criterion_gradients},
        {4, "toy-KB separation of implicit scores >= 0.15 after 200 epochs (< 60s)",
         criterion_separation},
        {5, "exact verification equals brute-force membership on 10^4 queries",
         criterion_exact_verification},
        {6, "retrieve_similar equals the exhaustive-scan oracle (set and order)",
         criterion_retrieval},
        {7, "parser golden suite round-trips; fuzz never aborts",
         criterion_parser_golden},
        {8, "case study flips eeik -> eelk within N=2; accuracy 0/2 -> 2/2",
         criterion_case_study},
        {9, "Algorithm-1 semantics: early exit, argmax fallback, call bounds, grid",
         criterion_algorithm_semantics},
        {10, "paper constants honored: gamma, temperature, tokens, SC n, counts",
         criterion_paper_constants},
        {11, "perturbation replaces exactly round(beta% * total), seeded",
         criterion_perturbation_impl},
        {12, "two replayed CLI runs emit byte-identical reports",
         criterion_replay_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Check check;
        try {
            criterion.fn(check);
        } catch (const std::exception& e) {
            check.require(false, std::string("exception: ") + e.what());
        }
        if (check.failures().empty()) {
            std::cout << "PASS criterion " << criterion.id << ": "
                      << criterion.description << "\n";
        } else {
            ++failures;
            std::cout << "FAIL criterion " << criterion.id << ": "
                      << criterion.description << "\n";
            for (const auto& failure : check.failures()) {
                std::cout << "     - " << failure.what << "\n";
            }
        }
    }
    if (failures != 0) {
        std::cout << failures << " criterion(s) failing\n";
        return 1;
    }
    std::cout << "all 12 criteria pass\n";
    return 0;
}
