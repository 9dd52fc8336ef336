#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "cok/prompt.hpp"
#include "support/helpers.hpp"

using namespace cok;
using testsupport::TempDir;

namespace {

std::vector<Exemplar> letter_exemplars() {
    return load_exemplars(testsupport::data_path("exemplars/letter.jsonl"));
}

}  // namespace

TEST_CASE("letter exemplars render with the paper's line format") {
    const auto exemplars = letter_exemplars();
    REQUIRE(exemplars.size() == 4);
    const std::string prompt = build_prompt(
        exemplars, PromptQuery{"Take the last letters of the words in \"Q T\" and "
                               "concatenate them."},
        PromptVariant::FullCoK);
    CHECK(prompt.find("1. (Elon, last latter, n)\n") != std::string::npos);
    CHECK(prompt.find("2. (Musk, last latter, k)\n") != std::string::npos);
    CHECK(prompt.find("So the answer is nk.\n") != std::string::npos);
    CHECK(prompt.find("A: Evidence triples:\n") != std::string::npos);
    CHECK(prompt.ends_with("A:"));
}

TEST_CASE("injected triples render after the query line") {
    const auto exemplars = letter_exemplars();
    const Triple inject = *Triple::normalized("Vishal", "last latter", "l");
    const std::string prompt = build_prompt(
        exemplars, PromptQuery{"Take the last letters of each words in \"Prince Rene "
                               "Vishal Patrick\" and concatenate them."},
        PromptVariant::FullCoK, {inject});
    const std::string tail =
        "Q: Take the last letters of each words in \"Prince Rene Vishal Patrick\" and "
        "concatenate them.\n(Vishal, last latter, l)\nA:";
    CHECK(prompt.ends_with(tail));
}

TEST_CASE("choices render on their own line") {
    const auto exemplars = letter_exemplars();
    PromptQuery query;
    query.question = "What island country is ferret popular?";
    query.choices = {{'A', "own home"}, {'B', "north carolina"}};
    const std::string prompt = build_prompt(exemplars, query, PromptVariant::FullCoK);
    CHECK(prompt.find("What island country is ferret popular?\n"
                      "Answer Choices: (A) own home (B) north carolina\nA:") !=
          std::string::npos);
}

TEST_CASE("prompt variants omit their blocks") {
    const auto exemplars = letter_exemplars();
    const PromptQuery query{"anything"};
    const std::string without_et =
        build_prompt(exemplars, query, PromptVariant::WithoutET);
    CHECK(without_et.find("Evidence triples:") == std::string::npos);
    CHECK(without_et.find("Explanation hints:") != std::string::npos);

    const std::string without_eh =
        build_prompt(exemplars, query, PromptVariant::WithoutEH);
    CHECK(without_eh.find("Evidence triples:") != std::string::npos);
    CHECK(without_eh.find("Explanation hints:") == std::string::npos);
}

TEST_CASE("build_prompt is pure") {
    const auto exemplars = letter_exemplars();
    const PromptQuery query{"same question"};
    CHECK(build_prompt(exemplars, query, PromptVariant::FullCoK) ==
          build_prompt(exemplars, query, PromptVariant::FullCoK));
}

TEST_CASE("full prompts need evidence triples in every exemplar") {
    Exemplar bare;
    bare.question = "q";
    bare.explanation = "e";
    bare.answer = Answer{YesNoAnswer{true}};
    bare.task_type = TaskType::YesNo;
    CHECK_THROWS_AS(build_prompt({bare}, PromptQuery{"x"}, PromptVariant::FullCoK),
                    ConfigError);
    // but the ET-free variant renders fine
    CHECK_NOTHROW(build_prompt({bare}, PromptQuery{"x"}, PromptVariant::WithoutET));
}

TEST_CASE("build_prompt requires exemplars") {
    CHECK_THROWS_AS(build_prompt({}, PromptQuery{"x"}, PromptVariant::FullCoK),
                    ConfigError);
}

TEST_CASE("extend_prompt appends injected lines before the final A:") {
    const auto exemplars = letter_exemplars();
    const PromptQuery query{"some question"};
    const std::string base = build_prompt(exemplars, query, PromptVariant::FullCoK);
    const Triple inject = *Triple::normalized("Vishal", "last letter", "l");
    const std::string extended = extend_prompt(base, {inject});
    CHECK(extended ==
          base.substr(0, base.size() - 2) + "(Vishal, last letter, l)\nA:");
    // identical to rebuilding with the injected list
    CHECK(extended == build_prompt(exemplars, query, PromptVariant::FullCoK, {inject}));
}

TEST_CASE("every shipped fixture round-trips through parse_response") {
    const std::map<std::string, std::size_t> expected_counts = {
        {"letter.jsonl", 4},     {"coin.jsonl", 8},       {"sports.jsonl", 6},
        {"arc_c.jsonl", 8},      {"openbookqa.jsonl", 8}, {"csqa.jsonl", 8},
        {"aqua.jsonl", 8},       {"gsm8k.jsonl", 8},      {"multiarith.jsonl", 8},
        {"svamp.jsonl", 8},      {"boolq.jsonl", 6},      {"strategyqa.jsonl", 6},
    };
    for (const auto& [file, count] : expected_counts) {
        const auto exemplars = load_exemplars(testsupport::data_path("exemplars/" + file));
        INFO(file);
        CHECK(exemplars.size() == count);
        for (const auto& ex : exemplars) {
            const std::string block = render_answer_block(ex, PromptVariant::FullCoK);
            const ReasoningChain chain = parse_response(block, ex.task_type);
            INFO(ex.question);
            CHECK(chain.warnings.empty());
            CHECK(chain.evidence_triples == ex.evidence_triples);
            CHECK(chain.explanation == ex.explanation);
            REQUIRE(chain.answer.has_value());
            CHECK(answers_equal(*chain.answer, ex.answer));
        }
    }
}

TEST_CASE("exemplar save/load round-trips") {
    const auto exemplars = load_exemplars(testsupport::data_path("exemplars/csqa.jsonl"));
    TempDir dir("exemplars");
    const std::string path = dir.file("out.jsonl");
    save_exemplars(exemplars, path);
    const auto loaded = load_exemplars(path);
    REQUIRE(loaded.size() == exemplars.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].question == exemplars[i].question);
        CHECK(loaded[i].choices == exemplars[i].choices);
        CHECK(loaded[i].evidence_triples == exemplars[i].evidence_triples);
        CHECK(loaded[i].explanation == exemplars[i].explanation);
        CHECK(answers_equal(loaded[i].answer, exemplars[i].answer));
    }
}

TEST_CASE("perturb replaces the seeded share of triples") {
    const auto exemplars = letter_exemplars();
    auto kb = load_kb_manifest(testsupport::data_path("kb/manifest.json"));

    std::size_t total = 0;
    for (const auto& ex : exemplars) total += ex.evidence_triples.size();
    REQUIRE(total == 12);

    SECTION("beta 0 changes nothing") {
        const auto unchanged = perturb_exemplars(exemplars, 0.0, kb, 9);
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            CHECK(unchanged[i].evidence_triples == exemplars[i].evidence_triples);
        }
    }

    SECTION("beta 100 replaces everything with KB triples") {
        const auto replaced = perturb_exemplars(exemplars, 100.0, kb, 9);
        std::size_t replaced_count = 0;
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            CHECK(replaced[i].explanation == exemplars[i].explanation);
            for (const auto& tr : replaced[i].evidence_triples) {
                CHECK(kb.contains(tr));
                ++replaced_count;
            }
        }
        CHECK(replaced_count == total);
    }

    SECTION("beta 50 touches exactly half, deterministically") {
        const auto a = perturb_exemplars(exemplars, 50.0, kb, 1234);
        const auto b = perturb_exemplars(exemplars, 50.0, kb, 1234);
        std::size_t changed = 0;
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            CHECK(a[i].evidence_triples == b[i].evidence_triples);
            for (std::size_t j = 0; j < exemplars[i].evidence_triples.size(); ++j) {
                changed += !(a[i].evidence_triples[j] == exemplars[i].evidence_triples[j]);
            }
        }
        CHECK(changed == 6);

        const auto c = perturb_exemplars(exemplars, 50.0, kb, 99);
        std::size_t changed_c = 0;
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            for (std::size_t j = 0; j < exemplars[i].evidence_triples.size(); ++j) {
                changed_c += !(c[i].evidence_triples[j] == exemplars[i].evidence_triples[j]);
            }
        }
        CHECK(changed_c == 6);
    }
}

TEST_CASE("exemplar drafting uses the zero-shot hint and retrieves candidates") {
    auto kb = load_kb_manifest(testsupport::data_path("kb/manifest.json"));
    HashedNgramEncoder enc;
    MockBackend llm;
    llm.script_for("Why is the sky blue?\nLet's think step by step.", DecodingParams{},
                   {"Rayleigh scattering favors short wavelengths."});
    const auto draft = assist_exemplar_construction("Why is the sky blue?", llm, kb,
                                                    enc, 3);
    CHECK(draft.unreviewed);
    CHECK(draft.explanation == "Rayleigh scattering favors short wavelengths.");
    CHECK(draft.candidates.size() == 3);

    MockBackend llm2;
    llm2.script({"canned rationale"});
    const auto no_candidates =
        assist_exemplar_construction("q", llm2, kb, enc, 0);
    CHECK(no_candidates.candidates.empty());

    // a single-triple KB yields that triple as the sole candidate
    TempDir dir("kb");
    testsupport::write_text_file(dir.file("one.tsv"), "a\tr\tb\n");
    auto one = load_kb(dir.file("one.tsv"), "commonsense");
    MockBackend llm3;
    llm3.script({"whatever rationale"});
    const auto single = assist_exemplar_construction("q", llm3, one, enc, 5);
    REQUIRE(single.candidates.size() == 1);
    CHECK(single.candidates[0].first == *Triple::normalized("a", "r", "b"));
}
