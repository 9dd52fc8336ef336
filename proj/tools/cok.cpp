// Command-line surface for the chain-of-knowledge pipeline: KB building and
// training, dataset runs with rethinking, one-off response verification,
// exemplar drafting and perturbation.

#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cok/cok.hpp"

namespace {

struct KbFlags {
    std::vector<std::string> kb_paths;
    std::string domain = "commonsense";
    std::string manifest;
    std::string aliases;

    void attach(CLI::App* cmd) {
        cmd->add_option("--kb", kb_paths, "KB TSV file(s)");
        cmd->add_option("--domain", domain,
                        "domain tag for --kb files (dictionary|commonsense|"
                        "causality|entity|event|script)");
        cmd->add_option("--manifest", manifest, "KB manifest JSON");
        cmd->add_option("--aliases", aliases, "relation alias TSV");
    }

    cok::KnowledgeBase load() const {
        if (!manifest.empty()) return cok::load_kb_manifest(manifest);
        if (kb_paths.empty()) {
            throw cok::ConfigError("either --manifest or --kb is required");
        }
        std::vector<cok::KbSource> sources;
        for (const auto& path : kb_paths) sources.push_back({path, domain});
        std::optional<std::string> alias_path;
        if (!aliases.empty()) alias_path = aliases;
        return cok::load_kb(sources, alias_path);
    }
};

std::unique_ptr<cok::TextEncoder> make_encoder(const std::string& spec) {
    if (spec.empty() || spec == "default") {
        return std::make_unique<cok::HashedNgramEncoder>();
    }
    if (spec.rfind("file:", 0) == 0) {
        return std::make_unique<cok::PrecomputedEncoder>(spec.substr(5));
    }
    if (spec.rfind("http", 0) == 0) {
        return std::make_unique<cok::HttpEncoder>(spec);
    }
    throw cok::ConfigError("unknown encoder spec \"" + spec +
                           "\" (default | file:PATH | http://...)");
}

int cmd_kb_build(const KbFlags& flags, const std::string& out_path) {
    auto kb = flags.load();
    if (!out_path.empty()) cok::save_kb(kb, out_path);
    std::map<std::string, std::size_t> domains;
    std::set<std::string> relations;
    std::set<std::string> subjects;
    for (std::size_t i = 0; i < kb.size(); ++i) {
        ++domains[kb.domain_of(i)];
        relations.insert(cok::fold_key(kb.triples()[i].relation));
        subjects.insert(cok::fold_key(kb.triples()[i].subject));
    }
    std::cout << "triples: " << kb.size() << "\n"
              << "subjects: " << subjects.size() << "\n"
              << "relations: " << relations.size() << "\n";
    for (const auto& [domain, count] : domains) {
        std::cout << "domain " << domain << ": " << count << "\n";
    }
    if (!out_path.empty()) std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_kb_train(const KbFlags& flags, const cok::TrainConfig& config,
                 const std::string& out_path) {
    auto kb = flags.load();
    auto model = cok::train(kb, config);
    cok::save_model(model, out_path);
    std::cout << "trained d=" << model.dim << " entities=" << model.num_entities()
              << " relations=" << model.num_relations() << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

struct RunFlags {
    std::string dataset_path;
    std::string exemplars_path;
    std::string model_path;
    std::string backend_config_path;
    std::string replay_path;
    std::string record_path;
    std::string report_path = "report.json";
    std::string trace_path;
    std::string variant = "full";
    std::string encoder_spec = "default";
    int max_iterations = 3;
    double threshold = 0.5;
    double gamma = cok::kDefaultGamma;
    int corrections_per_triple = 2;
    int max_injected = 6;
    int self_consistency = 0;
    double temperature = cok::kDefaultTemperature;
    int max_tokens = cok::kDefaultMaxTokens;
    double link_threshold = cok::kDefaultLinkThreshold;
    int parallelism = 1;
    double perturb_beta = 0.0;
    std::uint64_t seed = 42;
};

int cmd_run(const KbFlags& kb_flags, const RunFlags& flags) {
    auto kb = kb_flags.load();
    auto dataset = cok::load_dataset(flags.dataset_path);
    auto exemplars = cok::load_exemplars(flags.exemplars_path);
    if (flags.perturb_beta > 0.0) {
        exemplars = cok::perturb_exemplars(exemplars, flags.perturb_beta, kb, flags.seed);
    }

    auto encoder = make_encoder(flags.encoder_spec);
    std::optional<cok::EmbeddingModel> model;
    if (!flags.model_path.empty()) model = cok::load_model(flags.model_path);
    cok::Verifier verifier(kb, *encoder, model ? &*model : nullptr,
                           flags.link_threshold);

    std::unique_ptr<cok::LLMBackend> backend;
    std::string model_name;
    if (!flags.replay_path.empty()) {
        backend = std::make_unique<cok::ReplayBackend>(flags.replay_path);
    } else if (!flags.backend_config_path.empty()) {
        auto config = cok::load_backend_config(flags.backend_config_path);
        model_name = config.model;
        backend = std::make_unique<cok::HttpBackend>(std::move(config));
    } else {
        throw cok::ConfigError("one of --replay or --backend-config is required");
    }
    std::unique_ptr<cok::LLMBackend> transport = std::move(backend);
    std::unique_ptr<cok::RecordingBackend> recorder;
    if (!flags.record_path.empty()) {
        recorder = std::make_unique<cok::RecordingBackend>(*transport, flags.record_path);
    }

    cok::RethinkConfig config;
    config.max_iterations = flags.max_iterations;
    config.threshold = flags.threshold;
    config.gamma = flags.gamma;
    config.corrections_per_triple = flags.corrections_per_triple;
    config.max_injected_per_iteration = flags.max_injected;
    config.decoding.temperature = flags.temperature;
    config.decoding.max_tokens = flags.max_tokens;
    if (flags.self_consistency > 0) config.self_consistency = flags.self_consistency;
    const auto variant = cok::prompt_variant_from_name(flags.variant);
    if (!variant) {
        throw cok::ConfigError("unknown prompt variant \"" + flags.variant + "\"");
    }
    config.variant = *variant;
    config.validate();

    cok::RethinkContext ctx;
    ctx.exemplars = &exemplars;
    ctx.kb = &kb;
    ctx.encoder = encoder.get();
    ctx.verifier = &verifier;
    ctx.llm = recorder ? static_cast<cok::LLMBackend*>(recorder.get())
                       : transport.get();
    ctx.model_name = model_name;

    const auto outcomes = cok::run_dataset(ctx, dataset, config, flags.parallelism);

    nlohmann::json manifest;
    manifest["backend"] = ctx.llm->name();
    manifest["dataset"] = flags.dataset_path;
    manifest["exemplars"] = flags.exemplars_path;
    manifest["variant"] = std::string(cok::prompt_variant_name(config.variant));
    manifest["max_iterations"] = config.max_iterations;
    manifest["threshold"] = config.threshold;
    manifest["gamma"] = config.gamma;
    manifest["corrections_per_triple"] = config.corrections_per_triple;
    manifest["max_injected_per_iteration"] = config.max_injected_per_iteration;
    manifest["self_consistency"] =
        config.self_consistency ? nlohmann::json(*config.self_consistency)
                                : nlohmann::json(nullptr);
    manifest["temperature"] = config.decoding.temperature;
    manifest["max_tokens"] = config.decoding.max_tokens;
    manifest["perturb_beta"] = flags.perturb_beta;
    manifest["seed"] = flags.seed;
    manifest["encoder"] = flags.encoder_spec;
    manifest["model"] = flags.model_path;

    const auto report = cok::emit_report(outcomes, dataset, flags.report_path, manifest);
    if (!flags.trace_path.empty()) cok::write_trace(outcomes, flags.trace_path);
    cok::write_report_table(report, std::cout);
    std::cout << "wrote " << flags.report_path << "\n";
    return 0;
}

int cmd_verify(const KbFlags& kb_flags, const std::string& response_path,
               const std::string& question, const std::string& task_type_name,
               const std::string& model_path, const std::string& encoder_spec,
               double gamma) {
    auto kb = kb_flags.load();
    const auto task = cok::task_type_from_name(task_type_name);
    if (!task) {
        throw cok::ConfigError("unknown task type \"" + task_type_name + "\"");
    }
    auto encoder = make_encoder(encoder_spec);
    std::optional<cok::EmbeddingModel> model;
    if (!model_path.empty()) model = cok::load_model(model_path);
    cok::Verifier verifier(kb, *encoder, model ? &*model : nullptr);

    const std::string response = cok::read_file_bytes(response_path);
    const auto chain = cok::parse_response(response, *task);
    const auto report = verifier.assess(question, chain, gamma);

    for (const auto& warning : chain.warnings) {
        std::cout << "warning: " << warning.detail << "\n";
    }
    for (const auto& fact : report.factualities) {
        std::cout << fact.triple.render() << "  f_v=" << fact.score << " ("
                  << cok::fact_method_name(fact.method) << ")\n";
    }
    std::cout << "faithfulness: " << report.faithfulness << "\n"
              << "combined: " << report.combined << " (gamma=" << gamma << ")\n";
    if (chain.answer) {
        std::cout << "answer: " << cok::render_answer_value(*chain.answer) << "\n";
    } else {
        std::cout << "answer: none\n";
    }
    return 0;
}

int cmd_exemplar_draft(const KbFlags& kb_flags, const std::string& question,
                       const std::string& backend_config_path,
                       const std::string& encoder_spec, int k,
                       const std::string& out_path) {
    auto kb = kb_flags.load();
    auto encoder = make_encoder(encoder_spec);
    auto config = cok::load_backend_config(backend_config_path);
    cok::HttpBackend backend(config);
    const auto draft = cok::assist_exemplar_construction(question, backend, kb,
                                                         *encoder, k, config.model);
    nlohmann::json doc;
    doc["question"] = draft.question;
    doc["explanation"] = draft.explanation;
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& [triple, score] : draft.candidates) {
        candidates.push_back({{"triple", {triple.subject, triple.relation, triple.object}},
                              {"score", score}});
    }
    doc["candidate_triples"] = candidates;
    doc["unreviewed"] = draft.unreviewed;
    if (out_path.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        cok::write_file_bytes(out_path, doc.dump(2) + "\n");
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_perturb(const KbFlags& kb_flags, const std::string& in_path, double beta,
                std::uint64_t seed, const std::string& out_path) {
    auto kb = kb_flags.load();
    auto exemplars = cok::load_exemplars(in_path);
    auto perturbed = cok::perturb_exemplars(exemplars, beta, kb, seed);
    cok::save_exemplars(perturbed, out_path);
    std::size_t total = 0;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        for (std::size_t j = 0; j < exemplars[i].evidence_triples.size(); ++j) {
            ++total;
            changed += !(perturbed[i].evidence_triples[j] ==
                         exemplars[i].evidence_triples[j]);
        }
    }
    std::cout << "replaced " << changed << " of " << total << " triples (beta=" << beta
              << "%)\n"
              << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chain-of-knowledge prompting pipeline"};
    app.require_subcommand(1);

    // kb build / kb train
    auto* kb_cmd = app.add_subcommand("kb", "knowledge base utilities");
    kb_cmd->require_subcommand(1);

    auto* build_cmd = kb_cmd->add_subcommand("build", "validate and index KB files");
    KbFlags build_kb;
    build_kb.attach(build_cmd);
    std::string build_out;
    build_cmd->add_option("--out", build_out, "write canonical TSV here");

    auto* train_cmd = kb_cmd->add_subcommand("train", "train the embedding model");
    KbFlags train_kb;
    train_kb.attach(train_cmd);
    cok::TrainConfig train_config;
    std::string train_out = "model.cok";
    train_cmd->add_option("--out", train_out, "checkpoint path");
    train_cmd->add_option("--dim", train_config.dim, "embedding dimension");
    train_cmd->add_option("--margin", train_config.margin, "hinge margin");
    train_cmd->add_option("--learning-rate", train_config.learning_rate, "SGD step size");
    train_cmd->add_option("--epochs", train_config.epochs, "training epochs");
    train_cmd->add_option("--negatives-per-positive",
                          train_config.negatives_per_positive,
                          "corruptions per positive triple");
    train_cmd->add_option("--clusters-per-relation", train_config.clusters_per_relation,
                          "relation prototype clusters");
    train_cmd->add_option("--alpha", train_config.alpha, "energy balancing factor");
    train_cmd->add_option("--seed", train_config.seed, "training seed");

    // run
    auto* run_cmd = app.add_subcommand("run", "run a dataset through the pipeline");
    KbFlags run_kb;
    run_kb.attach(run_cmd);
    RunFlags run_flags;
    run_cmd->add_option("--dataset", run_flags.dataset_path, "dataset JSONL")->required();
    run_cmd->add_option("--exemplars", run_flags.exemplars_path, "exemplar JSONL")
        ->required();
    run_cmd->add_option("--model", run_flags.model_path, "embedding checkpoint");
    run_cmd->add_option("--backend-config", run_flags.backend_config_path,
                        "HTTP backend config JSON");
    run_cmd->add_option("--replay", run_flags.replay_path, "serve responses from log");
    run_cmd->add_option("--record", run_flags.record_path, "append responses to log");
    run_cmd->add_option("--report", run_flags.report_path, "report JSON path");
    run_cmd->add_option("--trace", run_flags.trace_path, "per-iteration trace JSONL");
    run_cmd->add_option("--variant", run_flags.variant,
                        "prompt variant: full|without_et|without_eh");
    run_cmd->add_option("--encoder", run_flags.encoder_spec,
                        "default | file:PATH | http://...");
    run_cmd->add_option("--max-iterations", run_flags.max_iterations,
                        "rethinking iterations N");
    run_cmd->add_option("--threshold", run_flags.threshold, "reliability threshold");
    run_cmd->add_option("--gamma", run_flags.gamma, "factuality/faithfulness balance");
    run_cmd->add_option("--corrections-per-triple", run_flags.corrections_per_triple,
                        "corrections looked up per failing triple");
    run_cmd->add_option("--max-injected", run_flags.max_injected,
                        "injection cap per iteration");
    run_cmd->add_option("--self-consistency", run_flags.self_consistency,
                        "sampled reasoning paths (0 = off)")
        ->expected(0, 1)
        ->default_str("0")
        ->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--temperature", run_flags.temperature, "decoding temperature");
    run_cmd->add_option("--max-tokens", run_flags.max_tokens, "max output tokens");
    run_cmd->add_option("--link-threshold", run_flags.link_threshold,
                        "vocabulary linking similarity threshold");
    run_cmd->add_option("--parallelism", run_flags.parallelism, "worker threads");
    run_cmd->add_option("--perturb-beta", run_flags.perturb_beta,
                        "replace this percentage of exemplar triples");
    run_cmd->add_option("--seed", run_flags.seed, "run seed");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "score one response file");
    KbFlags verify_kb;
    verify_kb.attach(verify_cmd);
    std::string verify_response;
    std::string verify_question;
    std::string verify_task = "multi_choice";
    std::string verify_model;
    std::string verify_encoder = "default";
    double verify_gamma = cok::kDefaultGamma;
    verify_cmd->add_option("--response", verify_response, "raw completion file")
        ->required();
    verify_cmd->add_option("--question", verify_question, "the query text")->required();
    verify_cmd->add_option("--task-type", verify_task,
                           "multi_choice|yes_no|numeric|string");
    verify_cmd->add_option("--model", verify_model, "embedding checkpoint");
    verify_cmd->add_option("--encoder", verify_encoder, "encoder spec");
    verify_cmd->add_option("--gamma", verify_gamma, "Eq-1 balance");

    // exemplar draft
    auto* exemplar_cmd = app.add_subcommand("exemplar", "exemplar construction helpers");
    exemplar_cmd->require_subcommand(1);
    auto* draft_cmd = exemplar_cmd->add_subcommand(
        "draft", "zero-shot rationale draft plus candidate triples");
    KbFlags draft_kb;
    draft_kb.attach(draft_cmd);
    std::string draft_question;
    std::string draft_backend;
    std::string draft_encoder = "default";
    std::string draft_out;
    int draft_k = 5;
    draft_cmd->add_option("--question", draft_question, "question to draft")->required();
    draft_cmd->add_option("--backend-config", draft_backend, "HTTP backend config JSON")
        ->required();
    draft_cmd->add_option("--encoder", draft_encoder, "encoder spec");
    draft_cmd->add_option("--k", draft_k, "candidate triples to retrieve");
    draft_cmd->add_option("--out", draft_out, "write the draft JSON here");

    // perturb
    auto* perturb_cmd = app.add_subcommand("perturb",
                                           "replace exemplar triples with KB samples");
    KbFlags perturb_kb;
    perturb_kb.attach(perturb_cmd);
    std::string perturb_in;
    std::string perturb_out;
    double perturb_beta = 0.0;
    std::uint64_t perturb_seed = 42;
    perturb_cmd->add_option("--exemplars", perturb_in, "input exemplar JSONL")
        ->required();
    perturb_cmd->add_option("--beta", perturb_beta, "percentage of triples to replace")
        ->required();
    perturb_cmd->add_option("--seed", perturb_seed, "sampling seed");
    perturb_cmd->add_option("--out", perturb_out, "output exemplar JSONL")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_cmd->parsed()) return cmd_kb_build(build_kb, build_out);
        if (train_cmd->parsed()) return cmd_kb_train(train_kb, train_config, train_out);
        if (run_cmd->parsed()) {
            if (run_cmd->count("--self-consistency") > 0 &&
                run_flags.self_consistency == 0) {
                run_flags.self_consistency = cok::kDefaultSelfConsistencySamples;
            }
            return cmd_run(run_kb, run_flags);
        }
        if (verify_cmd->parsed()) {
            return cmd_verify(verify_kb, verify_response, verify_question, verify_task,
                              verify_model, verify_encoder, verify_gamma);
        }
        if (draft_cmd->parsed()) {
            return cmd_exemplar_draft(draft_kb, draft_question, draft_backend,
                                      draft_encoder, draft_k, draft_out);
        }
        if (perturb_cmd->parsed()) {
            return cmd_perturb(perturb_kb, perturb_in, perturb_beta, perturb_seed,
                               perturb_out);
        }
        std::cerr << "no subcommand selected\n";
        return 1;
    } catch (const cok::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(cok::ExitCode::usage);
    } catch (const cok::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return static_cast<int>(cok::ExitCode::transport);
    } catch (const cok::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return static_cast<int>(cok::ExitCode::data);
    } catch (const cok::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(cok::ExitCode::data);
    }
}
