// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lexeval/commands.hpp"
#include "lexeval/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"checklist-based evaluation toolkit for long legal case records"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string output_dir_override;
    int workers_override = 0;
    app.add_option("--config", config_path, "run configuration file (JSON)")->required();
    app.add_option("--output-dir", output_dir_override,
                   "override the configured output directory");
    app.add_option("--workers", workers_override, "override the configured worker count");

    std::string model_summary;
    std::string reference_summary;
    CLI::App* eval_ref =
        app.add_subcommand("eval-ref", "score a model summary against a reference summary");
    eval_ref->add_option("model_summary", model_summary, "model summary text file")->required();
    eval_ref->add_option("reference_summary", reference_summary, "reference summary text file")
        ->required();

    std::string summarize_corpus;
    CLI::App* summarize = app.add_subcommand("summarize", "summarize a case corpus");
    summarize->add_option("corpus_dir", summarize_corpus, "case corpus directory")->required();

    std::string extract_method;
    std::string extract_corpus;
    CLI::App* extract =
        app.add_subcommand("extract", "extract the checklist from a case corpus");
    extract->add_option("method", extract_method, "extraction method")
        ->required()
        ->check(CLI::IsMember({"e2e", "chunked", "agent"}));
    extract->add_option("corpus_dir", extract_corpus, "case corpus directory")->required();

    std::string candidate_state;
    std::string reference_state;
    CLI::App* score_states =
        app.add_subcommand("score-states", "score a saved checklist state against a reference");
    score_states->add_option("candidate_state", candidate_state, "candidate state JSON file")
        ->required();
    score_states->add_option("reference_state", reference_state, "reference state JSON file")
        ->required();

    std::vector<std::string> run_dirs;
    CLI::App* report = app.add_subcommand("report", "aggregate finished runs into tables");
    report->add_option("run_dir", run_dirs, "run output directories")->required()->expected(-1);

    std::string human_file;
    std::string model_file;
    CLI::App* meta_eval =
        app.add_subcommand("meta-eval", "agreement between human and model judgment files");
    meta_eval->add_option("human_file", human_file, "human judgments JSON file")->required();
    meta_eval->add_option("model_file", model_file, "model judgments JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lexeval::kExitInput;
    }

    lexeval::RunConfig config;
    try {
        config = lexeval::RunConfig::load(config_path);
        if (!output_dir_override.empty()) config.output_dir = output_dir_override;
        if (workers_override > 0) config.workers = workers_override;
    } catch (const lexeval::Error& e) {
        std::cerr << "lexeval: " << e.what() << '\n';
        return lexeval::kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "lexeval: " << e.what() << '\n';
        return lexeval::kExitInput;
    }

    if (eval_ref->parsed()) {
        return lexeval::cmd_eval_ref(config, model_summary, reference_summary);
    }
    if (summarize->parsed()) {
        return lexeval::cmd_summarize(config, summarize_corpus);
    }
    if (extract->parsed()) {
        return lexeval::cmd_extract(config, extract_method, extract_corpus);
    }
    if (score_states->parsed()) {
        return lexeval::cmd_score_states(config, candidate_state, reference_state);
    }
    if (report->parsed()) {
        std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
        return lexeval::cmd_report(config, dirs);
    }
    if (meta_eval->parsed()) {
        return lexeval::cmd_meta_eval(config, human_file, model_file);
    }
    std::cerr << "lexeval: no command selected\n";
    return lexeval::kExitInput;
}
