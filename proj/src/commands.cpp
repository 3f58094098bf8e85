// SPDX-License-Identifier: Apache-2.0
#include "lexeval/commands.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include "lexeval/corpus.hpp"
#include "lexeval/errors.hpp"
#include "lexeval/ref_eval.hpp"
#include "lexeval/scoring.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {
namespace {

namespace fs = std::filesystem;

std::string fixed(double value, int precision) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << value;
    return out.str();
}

// Aligned "name value" lines for the score summaries.
void print_rows(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& rows) {
    std::size_t width = 0;
    for (const auto& [name, value] : rows) {
        (void)value;
        width = std::max(width, name.size());
    }
    for (const auto& [name, value] : rows) {
        out << name << std::string(width - name.size() + 2, ' ') << value << '\n';
    }
}

std::string sanitize_filename(const std::string& label) {
    std::string out;
    out.reserve(label.size());
    for (char c : label) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '.' || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

nlohmann::json parse_json_file(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// Shared outermost error mapping; partial-artifact backend handling lives
// inside the bodies where a ledger exists to flush.
int run_command(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const BackendUnavailable& e) {
        err << "lexeval: " << e.what() << '\n';
        return kExitBackend;
    } catch (const ContextOverflow& e) {
        err << "lexeval: " << e.what() << '\n';
        return kExitBackend;
    } catch (const Error& e) {
        err << "lexeval: " << e.what() << '\n';
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        err << "lexeval: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "lexeval: " << e.what() << '\n';
        return kExitInput;
    }
}

// Records every artifact name it writes, for the run record's outputs list.
struct ArtifactWriter {
    fs::path dir;
    std::vector<std::string> names;

    void json(const std::string& name, const nlohmann::json& j) {
        write_json_artifact(dir / name, j);
        names.push_back(name);
    }
    void text(const std::string& name, std::string_view content) {
        write_text_artifact(dir / name, content);
        names.push_back(name);
    }
};

std::string usage_line(const UsageLedger::Totals& totals) {
    std::ostringstream out;
    out << totals.calls << " calls, " << totals.input_tokens << " input tokens, "
        << totals.output_tokens << " output tokens";
    return out.str();
}

ItemScore item_score_from_json(const nlohmann::json& j) {
    ItemScore out;
    out.item_id = j.at("item_id").get<std::string>();
    out.applicable = j.at("applicable").get<bool>();
    if (j.contains("m") && j.at("m").is_number()) out.m = j.at("m").get<double>();
    out.overspecified = j.value("overspecified", false);
    out.underspecified = j.value("underspecified", false);
    out.abstained = j.value("abstained", false);
    return out;
}

std::string tsv_table(const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << '\t';
            out << row[i];
        }
        out << '\n';
    }
    return out.str();
}

// Fixed-width rendering of the same rows for the human-readable report.
std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << "  ";
            out << row[i];
            if (i + 1 < row.size()) out << std::string(widths[i] - row[i].size(), ' ');
        }
        out << '\n';
    }
    return out.str();
}

} // namespace

int cmd_eval_ref(const RunConfig& config, const fs::path& model_summary_path,
                 const fs::path& reference_summary_path, std::ostream& out, std::ostream& err) {
    return run_command(err, [&]() -> int {
        config.validate();
        const std::string model_summary = read_file(model_summary_path);
        const std::string reference_summary = read_file(reference_summary_path);
        RunContext ctx = make_run_context(config);
        RefEvaluator evaluator(
            *ctx.gateway, ctx.prompts, ctx.schema,
            EvalConfig{config.parse_retries, config.workers, config.params, ctx.style_rubric});

        const std::map<std::string, std::string> hashes{
            {"model_summary", fnv1a64_hex(model_summary)},
            {"reference_summary", fnv1a64_hex(reference_summary)},
            {"schema", file_hash(config.schema_path)}};
        ArtifactWriter artifacts{config.output_dir, {}};
        RunTimer timer;
        auto write_record = [&](const std::string& status, const std::string& error_msg) {
            nlohmann::json record =
                make_run_record(config, "eval-ref", hashes, artifacts.names,
                                ctx.gateway->ledger().total(), timer.seconds(), status, error_msg);
            record["method"] = "ref-eval";
            record["case_total_tokens"] = config.case_total_tokens;
            record["length_bin"] = length_bin_label(config.case_total_tokens);
            write_json_artifact(config.output_dir / "run_record.json", record);
        };
        auto backend_bail = [&](const std::exception& e) {
            artifacts.json("transcript.json", ctx.gateway->transcript_json());
            artifacts.json("usage.json", ctx.gateway->ledger().to_json());
            write_record("backend_error", e.what());
            err << "lexeval: " << e.what() << '\n';
            return kExitBackend;
        };

        RawEvaluation raw;
        try {
            raw = evaluator.evaluate_pair(model_summary, reference_summary);
        } catch (const BackendUnavailable& e) {
            return backend_bail(e);
        } catch (const ContextOverflow& e) {
            return backend_bail(e);
        }

        ScoreReport report;
        std::string undefined_msg;
        try {
            report = score_evaluation(raw, ctx.schema, config.alpha);
        } catch (const UndefinedScore& e) {
            undefined_msg = e.what();
        }
        artifacts.json("raw_evaluation.json", raw.to_json(ctx.schema));
        if (undefined_msg.empty()) artifacts.json("score_report.json", report.to_json());
        artifacts.json("transcript.json", ctx.gateway->transcript_json());
        artifacts.json("usage.json", ctx.gateway->ledger().to_json());
        write_record(undefined_msg.empty() ? "ok" : "undefined_score", undefined_msg);
        if (!undefined_msg.empty()) {
            err << "lexeval: " << undefined_msg << '\n';
            return kExitInput;
        }

        print_rows(out, {{"S_checklist", fixed(report.s_checklist, 2)},
                         {"S_residual", fixed(report.s_residual, 2)},
                         {"S_style", fixed(report.s_style, 2)},
                         {"r", fixed(report.r, 4)},
                         {"S_overall", fixed(report.s_overall, 2)}});
        out << "artifacts: " << config.output_dir.string() << '\n';
        return kExitOk;
    });
}

int cmd_summarize(const RunConfig& config, const fs::path& corpus_dir, std::ostream& out,
                  std::ostream& err) {
    return run_command(err, [&]() -> int {
        config.validate();
        RunContext ctx = make_run_context(config);
        const CaseCorpus corpus = load_corpus(ctx.tokenizer, corpus_dir);

        const std::map<std::string, std::string> hashes{
            {"corpus_manifest", file_hash(corpus_dir / "manifest.json")},
            {"schema", file_hash(config.schema_path)}};
        ArtifactWriter artifacts{config.output_dir, {}};
        RunTimer timer;
        auto write_record = [&](const std::string& status, const std::string& error_msg) {
            nlohmann::json record =
                make_run_record(config, "summarize", hashes, artifacts.names,
                                ctx.gateway->ledger().total(), timer.seconds(), status, error_msg);
            record["method"] = "summarize";
            record["case_id"] = corpus.case_id;
            record["case_total_tokens"] = corpus.total_tokens;
            record["length_bin"] = length_bin_label(corpus.total_tokens);
            write_json_artifact(config.output_dir / "run_record.json", record);
        };
        auto backend_bail = [&](const std::exception& e) {
            artifacts.json("transcript.json", ctx.gateway->transcript_json());
            artifacts.json("usage.json", ctx.gateway->ledger().to_json());
            write_record("backend_error", e.what());
            err << "lexeval: " << e.what() << '\n';
            return kExitBackend;
        };

        std::string summary;
        try {
            summary = generate_summary(*ctx.gateway, ctx.prompts, ctx.schema, corpus,
                                       config.params);
        } catch (const BackendUnavailable& e) {
            return backend_bail(e);
        } catch (const ContextOverflow& e) {
            return backend_bail(e);
        }

        artifacts.text("summary.txt",
                       summary.empty() || summary.back() == '\n' ? summary : summary + "\n");
        artifacts.json("transcript.json", ctx.gateway->transcript_json());
        artifacts.json("usage.json", ctx.gateway->ledger().to_json());
        write_record("ok", "");

        out << "summary: " << (config.output_dir / "summary.txt").string() << '\n';
        out << "usage: " << usage_line(ctx.gateway->ledger().total()) << '\n';
        return kExitOk;
    });
}

int cmd_extract(const RunConfig& config, const std::string& method, const fs::path& corpus_dir,
                std::ostream& out, std::ostream& err) {
    return run_command(err, [&]() -> int {
        config.validate();
        if (method != "e2e" && method != "chunked" && method != "agent") {
            throw ConfigError("unknown extract method '" + method +
                              "' (expected e2e, chunked, or agent)");
        }
        RunContext ctx = make_run_context(config);
        const CaseCorpus corpus = load_corpus(ctx.tokenizer, corpus_dir);

        const std::map<std::string, std::string> hashes{
            {"corpus_manifest", file_hash(corpus_dir / "manifest.json")},
            {"schema", file_hash(config.schema_path)}};
        ArtifactWriter artifacts{config.output_dir, {}};
        RunTimer timer;
        auto write_record = [&](const std::string& status, const std::string& error_msg) {
            nlohmann::json record =
                make_run_record(config, "extract", hashes, artifacts.names,
                                ctx.gateway->ledger().total(), timer.seconds(), status, error_msg);
            record["method"] = method;
            record["case_id"] = corpus.case_id;
            record["case_total_tokens"] = corpus.total_tokens;
            record["length_bin"] = length_bin_label(corpus.total_tokens);
            write_json_artifact(config.output_dir / "run_record.json", record);
        };
        auto backend_bail = [&](const std::exception& e) {
            artifacts.json("transcript.json", ctx.gateway->transcript_json());
            artifacts.json("usage.json", ctx.gateway->ledger().to_json());
            write_record("backend_error", e.what());
            err << "lexeval: " << e.what() << '\n';
            return kExitBackend;
        };

        ChecklistState state;
        nlohmann::json diagnostics{{"method", method}};
        std::optional<nlohmann::json> traces;
        std::vector<std::pair<std::string, std::string>> trace_logs; // file name, content
        try {
            if (method == "e2e") {
                ExtractionOutcome outcome =
                    extract_end_to_end(*ctx.gateway, ctx.prompts, ctx.schema, corpus,
                                       config.params, config.parse_retries, config.workers);
                state = std::move(outcome.state);
                diagnostics["notes"] = outcome.notes;
            } else if (method == "chunked") {
                ExtractionOutcome outcome = extract_chunk_by_chunk(
                    *ctx.gateway, ctx.prompts, ctx.schema, corpus, config.chunk_size,
                    config.params, config.parse_retries, config.workers);
                state = std::move(outcome.state);
                diagnostics["notes"] = outcome.notes;
            } else {
                AgentConfig agent = config.agent;
                agent.params = config.params;
                OrchestrationResult result =
                    orchestrate_agents(*ctx.gateway, ctx.prompts, ctx.schema, corpus, agent);
                state = std::move(result.state);
                diagnostics["item_errors"] = result.item_errors;
                nlohmann::json trace_array = nlohmann::json::array();
                for (const AgentTrace& trace : result.traces) {
                    trace_array.push_back(trace.to_json());
                    std::ostringstream lines;
                    for (const AgentStepRecord& step : trace.log) {
                        lines << step.to_json().dump() << '\n';
                    }
                    trace_logs.emplace_back(sanitize_filename(trace.cell) + ".jsonl",
                                            lines.str());
                }
                traces = std::move(trace_array);
            }
        } catch (const BackendUnavailable& e) {
            return backend_bail(e);
        } catch (const ContextOverflow& e) {
            return backend_bail(e);
        }

        artifacts.json("state.json", state_to_json(state, ctx.schema.version()));
        artifacts.json("diagnostics.json", diagnostics);
        if (traces) {
            artifacts.json("traces.json", *traces);
            for (const auto& [name, content] : trace_logs) {
                artifacts.text("trace_logs/" + name, content);
            }
        }
        artifacts.json("transcript.json", ctx.gateway->transcript_json());
        artifacts.json("usage.json", ctx.gateway->ledger().to_json());
        write_record("ok", "");

        std::size_t filled = 0;
        std::size_t not_applicable = 0;
        for (const auto& def : ctx.schema.items()) {
            switch (item_status(ctx.schema, state, def.item_id)) {
            case ItemStatus::Filled: ++filled; break;
            case ItemStatus::NotApplicable: ++not_applicable; break;
            default: break;
            }
        }
        out << "method: " << method << '\n';
        out << "items: " << filled << " filled, " << not_applicable << " not applicable, "
            << (ctx.schema.items().size() - filled - not_applicable) << " empty\n";
        out << "usage: " << usage_line(ctx.gateway->ledger().total()) << '\n';
        out << "artifacts: " << config.output_dir.string() << '\n';
        return kExitOk;
    });
}

int cmd_score_states(const RunConfig& config, const fs::path& candidate_state_path,
                     const fs::path& reference_state_path, std::ostream& out, std::ostream& err) {
    return run_command(err, [&]() -> int {
        config.validate();
        RunContext ctx = make_run_context(config);

        auto load_versioned = [&](const fs::path& path) {
            nlohmann::json j = parse_json_file(path);
            if (!j.is_object() || !j.contains("schema_version") ||
                !j.at("schema_version").is_string()) {
                throw ParseError(path.string() + ": missing schema_version");
            }
            return j;
        };
        const nlohmann::json candidate_json = load_versioned(candidate_state_path);
        const nlohmann::json reference_json = load_versioned(reference_state_path);
        const std::string candidate_version = candidate_json.at("schema_version");
        const std::string reference_version = reference_json.at("schema_version");
        if (candidate_version != reference_version) {
            throw ConfigError("schema version mismatch between states: '" + candidate_version +
                              "' vs '" + reference_version + "'");
        }
        if (candidate_version != ctx.schema.version()) {
            throw ConfigError("state schema version '" + candidate_version +
                              "' does not match the configured schema '" + ctx.schema.version() +
                              "'");
        }
        const ChecklistState candidate = state_from_json(ctx.schema, candidate_json);
        const ChecklistState reference = state_from_json(ctx.schema, reference_json);

        RefEvaluator evaluator(
            *ctx.gateway, ctx.prompts, ctx.schema,
            EvalConfig{config.parse_retries, config.workers, config.params, ctx.style_rubric});

        const std::map<std::string, std::string> hashes{
            {"candidate_state", file_hash(candidate_state_path)},
            {"reference_state", file_hash(reference_state_path)},
            {"schema", file_hash(config.schema_path)}};
        ArtifactWriter artifacts{config.output_dir, {}};
        RunTimer timer;
        auto write_record = [&](const std::string& status, const std::string& error_msg) {
            nlohmann::json record = make_run_record(config, "score-states", hashes,
                                                    artifacts.names, ctx.gateway->ledger().total(),
                                                    timer.seconds(), status, error_msg);
            record["method"] = "score-states";
            record["case_total_tokens"] = config.case_total_tokens;
            record["length_bin"] = length_bin_label(config.case_total_tokens);
            write_json_artifact(config.output_dir / "run_record.json", record);
        };
        auto backend_bail = [&](const std::exception& e) {
            artifacts.json("transcript.json", ctx.gateway->transcript_json());
            artifacts.json("usage.json", ctx.gateway->ledger().to_json());
            write_record("backend_error", e.what());
            err << "lexeval: " << e.what() << '\n';
            return kExitBackend;
        };

        const auto& defs = ctx.schema.items();
        std::vector<ItemScore> item_scores(defs.size());
        std::vector<std::optional<ComparisonOutcome>> outcomes(defs.size());
        std::vector<std::vector<std::string>> notes(defs.size());
        try {
            parallel_for(defs.size(), config.workers, [&](std::size_t i) {
                const ChecklistItemDef& def = defs[i];
                const auto a = strip_not_applicable(candidate.values(def.item_id));
                const auto b = strip_not_applicable(reference.values(def.item_id));
                ItemScore score;
                score.item_id = def.item_id;
                score.applicable = !a.empty() || !b.empty();
                if (score.applicable) {
                    ComparisonOutcome outcome = evaluator.compare_item(
                        def, a, b, "compare:" + def.item_id, &notes[i]);
                    score.m = matching_score(outcome, def.cardinality);
                    score.overspecified = !a.empty() && b.empty();
                    score.underspecified = a.empty() && !b.empty();
                    score.abstained = outcome.abstained;
                    outcomes[i] = std::move(outcome);
                }
                item_scores[i] = std::move(score);
            });
        } catch (const BackendUnavailable& e) {
            return backend_bail(e);
        } catch (const ContextOverflow& e) {
            return backend_bail(e);
        }

        nlohmann::json outcomes_json = nlohmann::json::array();
        for (const auto& outcome : outcomes) {
            if (outcome) outcomes_json.push_back(outcome_to_json(*outcome));
        }
        nlohmann::json compare_notes = nlohmann::json::object();
        for (std::size_t i = 0; i < defs.size(); ++i) {
            if (!notes[i].empty()) compare_notes[defs[i].item_id] = notes[i];
        }
        const nlohmann::json diagnostics{{"compare", std::move(compare_notes)}};

        double s_checklist = 0;
        std::string undefined_msg;
        try {
            s_checklist = checklist_score(item_scores);
        } catch (const UndefinedScore& e) {
            undefined_msg = e.what();
        }

        artifacts.json("outcomes.json", outcomes_json);
        artifacts.json("diagnostics.json", diagnostics);
        if (undefined_msg.empty()) {
            ScoreReport report;
            report.s_checklist = s_checklist;
            report.alpha = config.alpha;
            report.item_scores = item_scores;
            nlohmann::json report_json = report.to_json();
            // Residual and style need summaries; two bare states have neither.
            report_json["s_residual"] = nullptr;
            report_json["s_style"] = nullptr;
            report_json["r"] = nullptr;
            report_json["s_overall"] = nullptr;
            artifacts.json("score_report.json", report_json);
        }
        artifacts.json("transcript.json", ctx.gateway->transcript_json());
        artifacts.json("usage.json", ctx.gateway->ledger().to_json());
        write_record(undefined_msg.empty() ? "ok" : "undefined_score", undefined_msg);
        if (!undefined_msg.empty()) {
            err << "lexeval: " << undefined_msg << '\n';
            return kExitInput;
        }

        print_rows(out, {{"S_checklist", fixed(s_checklist, 2)},
                         {"S_residual", "absent"},
                         {"S_style", "absent"},
                         {"r", "absent"},
                         {"S_overall", "absent"}});
        out << "artifacts: " << config.output_dir.string() << '\n';
        return kExitOk;
    });
}

namespace {

struct RunEntry {
    std::string name;
    std::string model;
    std::string bin;
    std::optional<double> score;
    bool has_items = false;
    std::map<std::string, ItemScore> items;
    UsageLedger::Totals usage;
};

// "32000" < "64000" < ... numerically, with "unbinned" sorted last.
bool bin_less(const std::string& a, const std::string& b) {
    const bool a_num = !a.empty() && a != "unbinned";
    const bool b_num = !b.empty() && b != "unbinned";
    if (a_num != b_num) return a_num;
    if (!a_num) return a < b;
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

} // namespace

int cmd_report(const RunConfig& config, const std::vector<fs::path>& run_dirs, std::ostream& out,
               std::ostream& err) {
    return run_command(err, [&]() -> int {
        config.validate();
        if (run_dirs.empty()) {
            throw ConfigError("report: at least one run directory is required");
        }
        const ChecklistSchema schema = ChecklistSchema::load(config.schema_path);

        std::vector<RunEntry> entries;
        std::map<std::string, std::string> hashes;
        for (const fs::path& dir : run_dirs) {
            const fs::path record_path = dir / "run_record.json";
            if (!fs::is_regular_file(record_path)) {
                throw ConfigError("report: no run_record.json in " + dir.string());
            }
            const nlohmann::json record = parse_json_file(record_path);
            hashes[dir.string()] = file_hash(record_path);

            RunEntry entry;
            entry.name = dir.string();
            entry.model = record.value("model", "unknown");
            entry.bin = record.value("length_bin", "unbinned");
            if (record.contains("usage") && record.at("usage").is_object()) {
                const auto& usage = record.at("usage");
                entry.usage.calls = usage.value("calls", std::uint64_t{0});
                entry.usage.input_tokens = usage.value("input_tokens", std::uint64_t{0});
                entry.usage.output_tokens = usage.value("output_tokens", std::uint64_t{0});
            }
            const fs::path report_path = dir / "score_report.json";
            if (fs::is_regular_file(report_path)) {
                const nlohmann::json score_report = parse_json_file(report_path);
                if (score_report.contains("s_overall") && score_report.at("s_overall").is_number()) {
                    entry.score = score_report.at("s_overall").get<double>();
                } else if (score_report.contains("s_checklist") &&
                           score_report.at("s_checklist").is_number()) {
                    entry.score = score_report.at("s_checklist").get<double>();
                }
                if (score_report.contains("item_scores") &&
                    score_report.at("item_scores").is_array()) {
                    for (const auto& j : score_report.at("item_scores")) {
                        ItemScore item = item_score_from_json(j);
                        entry.items[item.item_id] = std::move(item);
                    }
                    entry.has_items = true;
                }
            }
            entries.push_back(std::move(entry));
        }

        // Score matrix: model rows, length-bin columns, cell = mean score.
        std::set<std::string> models;
        std::vector<std::string> bins;
        for (const auto& entry : entries) {
            models.insert(entry.model);
            if (std::find(bins.begin(), bins.end(), entry.bin) == bins.end()) {
                bins.push_back(entry.bin);
            }
        }
        std::sort(bins.begin(), bins.end(), bin_less);

        std::vector<std::vector<std::string>> score_rows;
        {
            std::vector<std::string> header{"model"};
            header.insert(header.end(), bins.begin(), bins.end());
            score_rows.push_back(std::move(header));
            for (const auto& model : models) {
                std::vector<std::string> row{model};
                for (const auto& bin : bins) {
                    double sum = 0;
                    std::size_t n = 0;
                    for (const auto& entry : entries) {
                        if (entry.model == model && entry.bin == bin && entry.score) {
                            sum += *entry.score;
                            ++n;
                        }
                    }
                    row.push_back(n ? fixed(sum / static_cast<double>(n), 2) : "-");
                }
                score_rows.push_back(std::move(row));
            }
        }

        // Per-item matching scores pooled over the scored runs.
        std::vector<std::vector<ItemScore>> cases;
        for (const auto& entry : entries) {
            if (!entry.has_items) continue;
            std::vector<ItemScore> row;
            row.reserve(entry.items.size());
            for (const auto& [id, item] : entry.items) {
                (void)id;
                row.push_back(item);
            }
            cases.push_back(std::move(row));
        }

        std::vector<std::vector<std::string>> item_rows;
        item_rows.push_back({"item_id", "mean_m", "n_applicable", "n_cases"});
        for (const auto& def : schema.items()) {
            double sum = 0;
            std::size_t applicable = 0;
            std::size_t seen = 0;
            for (const auto& entry : entries) {
                if (!entry.has_items) continue;
                auto it = entry.items.find(def.item_id);
                if (it == entry.items.end()) continue;
                ++seen;
                if (it->second.applicable && it->second.m) {
                    sum += *it->second.m;
                    ++applicable;
                }
            }
            item_rows.push_back({def.item_id,
                                 applicable ? fixed(sum / static_cast<double>(applicable), 4) : "-",
                                 std::to_string(applicable), std::to_string(seen)});
        }

        // Over-specification is counted over every case; under-specification
        // only over cases whose reference side fills the item.
        std::vector<std::vector<std::string>> spec_rows;
        spec_rows.push_back(
            {"item_id", "overspec_rate", "underspec_rate", "n_reference_filled", "n_cases"});
        if (!cases.empty()) {
            const auto rates = specification_rates(cases);
            for (const auto& def : schema.items()) {
                auto it = rates.find(def.item_id);
                if (it == rates.end()) continue;
                std::size_t reference_filled = 0;
                for (const auto& case_items : cases) {
                    for (const auto& item : case_items) {
                        if (item.item_id == def.item_id && item.applicable &&
                            !item.overspecified) {
                            ++reference_filled;
                        }
                    }
                }
                spec_rows.push_back({def.item_id, fixed(it->second.overspec_rate, 4),
                                     it->second.underspec_rate
                                         ? fixed(*it->second.underspec_rate, 4)
                                         : "-",
                                     std::to_string(reference_filled),
                                     std::to_string(cases.size())});
            }
        }

        std::vector<std::vector<std::string>> usage_rows;
        usage_rows.push_back({"run", "model", "calls", "input_tokens", "output_tokens"});
        for (const auto& entry : entries) {
            usage_rows.push_back({entry.name, entry.model, std::to_string(entry.usage.calls),
                                  std::to_string(entry.usage.input_tokens),
                                  std::to_string(entry.usage.output_tokens)});
        }

        ArtifactWriter artifacts{config.output_dir, {}};
        RunTimer timer;
        artifacts.text("scores.tsv", tsv_table(score_rows));
        artifacts.text("items.tsv", tsv_table(item_rows));
        artifacts.text("spec_rates.tsv", tsv_table(spec_rows));
        artifacts.text("usage.tsv", tsv_table(usage_rows));

        std::ostringstream human;
        human << "== Overall scores (mean S_overall; S_checklist when overall is absent) ==\n"
              << aligned_table(score_rows) << '\n'
              << "== Per-item matching scores ==\n"
              << aligned_table(item_rows) << '\n'
              << "== Specification rates ==\n"
              << aligned_table(spec_rows) << '\n'
              << "== Token usage ==\n"
              << aligned_table(usage_rows);
        artifacts.text("report.txt", human.str());

        nlohmann::json record =
            make_run_record(config, "report", hashes, artifacts.names, UsageLedger::Totals{},
                            timer.seconds(), "ok", "");
        record["runs"] = entries.size();
        write_json_artifact(config.output_dir / "run_record.json", record);

        std::size_t scored = 0;
        for (const auto& entry : entries) {
            if (entry.score) ++scored;
        }
        out << "report: " << entries.size() << " runs, " << scored << " scored\n";
        out << "artifacts: " << config.output_dir.string() << '\n';
        return kExitOk;
    });
}

namespace {

struct JudgmentFile {
    std::vector<SingleRelation> relations;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs;
    std::vector<std::vector<bool>> coverage;
    std::vector<StyleRating> ratings;
};

JudgmentFile judgments_from_json(const nlohmann::json& j, const fs::path& path) {
    if (!j.is_object()) throw ParseError(path.string() + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "single_relations" && key != "pairs" && key != "coverage" &&
            key != "style_ratings") {
            throw ParseError(path.string() + ": unknown key '" + key + "'");
        }
    }
    JudgmentFile out;
    if (j.contains("single_relations")) {
        for (const auto& entry : j.at("single_relations")) {
            if (!entry.is_string()) {
                throw ParseError(path.string() + ": single_relations entries must be strings");
            }
            out.relations.push_back(relation_from_string(entry.get<std::string>()));
        }
    }
    if (j.contains("pairs")) {
        for (const auto& case_pairs : j.at("pairs")) {
            std::vector<std::pair<std::size_t, std::size_t>> row;
            for (const auto& pair : case_pairs) {
                if (!pair.is_array() || pair.size() != 2 || !pair.at(0).is_number_integer() ||
                    !pair.at(1).is_number_integer() || pair.at(0).get<long long>() < 0 ||
                    pair.at(1).get<long long>() < 0) {
                    throw ParseError(path.string() +
                                     ": pairs entries must be [a, b] index pairs");
                }
                row.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
            }
            out.pairs.push_back(std::move(row));
        }
    }
    if (j.contains("coverage")) {
        for (const auto& case_coverage : j.at("coverage")) {
            std::vector<bool> row;
            for (const auto& flag : case_coverage) {
                if (!flag.is_boolean()) {
                    throw ParseError(path.string() + ": coverage entries must be booleans");
                }
                row.push_back(flag.get<bool>());
            }
            out.coverage.push_back(std::move(row));
        }
    }
    if (j.contains("style_ratings")) {
        for (const auto& case_rating : j.at("style_ratings")) {
            if (!case_rating.is_array() || case_rating.size() != 5) {
                throw ParseError(path.string() +
                                 ": style_ratings entries must hold five aspect scores");
            }
            StyleRating rating;
            for (std::size_t i = 0; i < 5; ++i) {
                if (!case_rating.at(i).is_number_integer()) {
                    throw ParseError(path.string() + ": style ratings must be integers");
                }
                const long long value = case_rating.at(i).get<long long>();
                if (value < 1 || value > 5) {
                    throw ParseError(path.string() + ": style ratings must be within [1, 5]");
                }
                rating.scores[i] = static_cast<int>(value);
            }
            out.ratings.push_back(rating);
        }
    }
    return out;
}

} // namespace

int cmd_meta_eval(const RunConfig& config, const fs::path& human_file, const fs::path& model_file,
                  std::ostream& out, std::ostream& err) {
    return run_command(err, [&]() -> int {
        config.validate();
        const JudgmentFile human = judgments_from_json(parse_json_file(human_file), human_file);
        const JudgmentFile model = judgments_from_json(parse_json_file(model_file), model_file);

        const AgreementReport report =
            agreement_metrics(human.relations, model.relations, human.pairs, model.pairs,
                              human.coverage, model.coverage, human.ratings, model.ratings);

        const std::map<std::string, std::string> hashes{{"human", file_hash(human_file)},
                                                        {"model", file_hash(model_file)}};
        ArtifactWriter artifacts{config.output_dir, {}};
        RunTimer timer;
        artifacts.json("agreement.json", report.to_json());
        nlohmann::json record =
            make_run_record(config, "meta-eval", hashes, artifacts.names, UsageLedger::Totals{},
                            timer.seconds(), "ok", "");
        write_json_artifact(config.output_dir / "run_record.json", record);

        std::vector<std::pair<std::string, std::string>> rows{
            {"single_accuracy", fixed(report.single_accuracy, 4)},
            {"pairs_f1", fixed(report.pairs_f1, 4)},
            {"coverage_agreement", fixed(report.coverage_agreement, 4)},
            {"style_kappa", fixed(report.style_kappa, 4)}};
        for (std::size_t i = 0; i < kStyleAspects.size(); ++i) {
            rows.emplace_back("kappa_" + std::string(kStyleAspects[i]),
                              fixed(report.per_aspect_kappa[i], 4));
        }
        print_rows(out, rows);
        out << "artifacts: " << config.output_dir.string() << '\n';
        return kExitOk;
    });
}

} // namespace lexeval
