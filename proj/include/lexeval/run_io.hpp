// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexeval/backend.hpp"
#include "lexeval/checklist.hpp"
#include "lexeval/doc_extract.hpp"
#include "lexeval/gateway.hpp"
#include "lexeval/prompt_template.hpp"
#include "lexeval/tokenizer.hpp"

namespace lexeval {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

/// Case-length bin targets in tokens. A case joins the closest target whose
/// +-20% interval contains its total; outside every interval it is unbinned.
const std::vector<std::size_t>& length_bin_targets();

/// "32000" ... "512000", or "unbinned".
std::string length_bin_label(std::size_t total_tokens);

// Backend selection half of a run configuration. HTTP credentials are never
// stored here: api_key_env names the environment variable read at call time.
struct BackendSettings {
    std::string kind = "mock"; // "mock" | "http"
    std::filesystem::path script_path;
    std::size_t context_limit_tokens = 0;
    HttpBackendConfig http;
};

// One run, fully described by a single JSON file. Relative paths in the file
// resolve against the file's own directory, so a config travels with its
// data. load() validates; a config assembled in code should be validated
// explicitly before use.
struct RunConfig {
    BackendSettings backend;
    ModelParams params;
    double alpha = 0.9;
    std::string tokenizer_id = "rule_based_v1";
    std::filesystem::path schema_path;
    std::filesystem::path prompts_dir;
    std::filesystem::path style_rubric_path; // optional
    std::string method = "ref-eval";
    AgentConfig agent;
    std::size_t chunk_size = kDefaultChunkTokens;
    int parse_retries = 2;
    int workers = 1;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    std::size_t case_total_tokens = 0; // 0 = take from the corpus when one is loaded

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    nlohmann::json to_json() const;
    void validate() const; // throws ConfigError
};

/// "mock:<script stem>" or the HTTP model name; feeds the report tables.
std::string model_label(const RunConfig& config);

// Live objects for one run. The gateway owns the backend and retry loop;
// tokenizer and schema are also exposed directly for corpus and state work.
struct RunContext {
    Tokenizer tokenizer;
    std::unique_ptr<ModelGateway> gateway;
    PromptSet prompts;
    ChecklistSchema schema;
    std::string style_rubric; // empty when no rubric path is configured
};

RunContext make_run_context(const RunConfig& config);

/// Wall-clock stopwatch for the run record.
class RunTimer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Content hash of a file, as stored in run-record input_hashes.
std::string file_hash(const std::filesystem::path& path);

/// Serializes with a 2-space indent and trailing newline, then writes
/// atomically (temp file + rename), creating parent directories.
void write_json_artifact(const std::filesystem::path& path, const nlohmann::json& j);

/// Atomic text write, creating parent directories.
void write_text_artifact(const std::filesystem::path& path, std::string_view content);

/// The provenance record written beside every command's outputs. Input
/// hashes detect silent drift of configs, prompts, and data between runs;
/// callers may attach further fields (method, length bin) before writing.
nlohmann::json make_run_record(const RunConfig& config, const std::string& command,
                               const std::map<std::string, std::string>& input_hashes,
                               const std::vector<std::string>& outputs,
                               const UsageLedger::Totals& usage, double wall_seconds,
                               const std::string& status, const std::string& error = "");

} // namespace lexeval
