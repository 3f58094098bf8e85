// SPDX-License-Identifier: Apache-2.0
#include "lexeval/run_io.hpp"

#include <set>
#include <utility>

#include "lexeval/corpus.hpp"
#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {
namespace {

namespace fs = std::filesystem;

const nlohmann::json& require_object(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be a JSON object");
    return j;
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) {
            throw ConfigError("config: unknown key '" + key + "' in " + where);
        }
    }
}

std::string get_string(const nlohmann::json& j, const std::string& key, std::string fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError("config: '" + key + "' must be a string");
    return j.at(key).get<std::string>();
}

double get_number(const nlohmann::json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return j.at(key).get<double>();
}

std::size_t get_size(const nlohmann::json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer() || j.at(key).get<long long>() < 0) {
        throw ConfigError("config: '" + key + "' must be a non-negative integer");
    }
    return j.at(key).get<std::size_t>();
}

fs::path get_path(const nlohmann::json& j, const std::string& key, const fs::path& base_dir) {
    std::string raw = get_string(j, key, "");
    if (raw.empty()) return {};
    fs::path p(raw);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p.lexically_normal();
}

BackendSettings backend_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    require_object(j, "'backend'");
    // Secrets never live in config files; only the env-var name is accepted.
    for (const char* leaked : {"api_key", "token", "bearer_token", "secret"}) {
        if (j.contains(leaked)) {
            throw ConfigError(std::string("config: backend must not embed credentials; set "
                                          "'api_key_env' to the environment variable name "
                                          "instead of '") +
                              leaked + "'");
        }
    }
    reject_unknown_keys(j,
                        {"kind", "script", "context_limit_tokens", "base_url", "path", "model",
                         "api_key_env", "timeout_seconds"},
                        "'backend'");
    BackendSettings out;
    out.kind = get_string(j, "kind", "mock");
    out.script_path = get_path(j, "script", base_dir);
    out.context_limit_tokens = get_size(j, "context_limit_tokens", 0);
    out.http.base_url = get_string(j, "base_url", "");
    out.http.path = get_string(j, "path", out.http.path);
    out.http.model = get_string(j, "model", "");
    out.http.api_key_env = get_string(j, "api_key_env", "");
    out.http.timeout_seconds = get_size(j, "timeout_seconds", out.http.timeout_seconds);
    out.http.context_limit_tokens = out.context_limit_tokens;
    return out;
}

ModelParams params_from_json(const nlohmann::json& j) {
    require_object(j, "'params'");
    reject_unknown_keys(j, {"temperature", "top_p", "max_output_tokens", "reasoning_mode"},
                        "'params'");
    ModelParams out;
    out.temperature = get_number(j, "temperature", out.temperature);
    out.top_p = get_number(j, "top_p", out.top_p);
    out.max_output_tokens = get_size(j, "max_output_tokens", out.max_output_tokens);
    out.reasoning_mode = get_string(j, "reasoning_mode", out.reasoning_mode);
    return out;
}

AgentConfig agent_from_json(const nlohmann::json& j, const ModelParams& params) {
    require_object(j, "'agent'");
    reject_unknown_keys(j, {"mode", "step_budget", "search_top_k", "search_context_tokens"},
                        "'agent'");
    AgentConfig out;
    out.mode = agent_mode_from_string(get_string(j, "mode", to_string(out.mode)));
    out.step_budget = get_size(j, "step_budget", out.step_budget);
    out.search_top_k = get_size(j, "search_top_k", out.search_top_k);
    out.search_context_tokens = get_size(j, "search_context_tokens", out.search_context_tokens);
    out.params = params;
    return out;
}

} // namespace

const std::vector<std::size_t>& length_bin_targets() {
    static const std::vector<std::size_t> targets = {32000, 64000, 128000, 256000, 512000};
    return targets;
}

std::string length_bin_label(std::size_t total_tokens) {
    auto bin = assign_length_bin(total_tokens, length_bin_targets());
    if (!bin) return "unbinned";
    return std::to_string(*bin);
}

RunConfig RunConfig::load(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    RunConfig config = from_json(j, path.parent_path());
    config.validate();
    return config;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    require_object(j, "top level");
    reject_unknown_keys(j,
                        {"backend", "params", "alpha", "tokenizer", "schema", "prompts",
                         "style_rubric", "method", "agent", "chunk_size_tokens", "parse_retries",
                         "workers", "output_dir", "seed", "case_total_tokens"},
                        "top level");
    RunConfig out;
    if (j.contains("backend")) out.backend = backend_from_json(j.at("backend"), base_dir);
    if (j.contains("params")) out.params = params_from_json(j.at("params"));
    out.alpha = get_number(j, "alpha", out.alpha);
    out.tokenizer_id = get_string(j, "tokenizer", out.tokenizer_id);
    out.schema_path = get_path(j, "schema", base_dir);
    out.prompts_dir = get_path(j, "prompts", base_dir);
    out.style_rubric_path = get_path(j, "style_rubric", base_dir);
    out.method = get_string(j, "method", out.method);
    if (j.contains("agent")) out.agent = agent_from_json(j.at("agent"), out.params);
    out.agent.params = out.params;
    out.chunk_size = get_size(j, "chunk_size_tokens", out.chunk_size);
    out.parse_retries = static_cast<int>(get_size(j, "parse_retries", out.parse_retries));
    out.workers = static_cast<int>(get_size(j, "workers", out.workers));
    out.output_dir = get_path(j, "output_dir", base_dir);
    out.seed = get_size(j, "seed", out.seed);
    out.case_total_tokens = get_size(j, "case_total_tokens", out.case_total_tokens);
    return out;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json backend_j{{"kind", backend.kind},
                             {"context_limit_tokens", backend.context_limit_tokens}};
    if (backend.kind == "mock") {
        backend_j["script"] = backend.script_path.string();
    } else {
        backend_j["base_url"] = backend.http.base_url;
        backend_j["path"] = backend.http.path;
        backend_j["model"] = backend.http.model;
        backend_j["api_key_env"] = backend.http.api_key_env;
        backend_j["timeout_seconds"] = backend.http.timeout_seconds;
    }
    return nlohmann::json{
        {"backend", std::move(backend_j)},
        {"params",
         {{"temperature", params.temperature},
          {"top_p", params.top_p},
          {"max_output_tokens", params.max_output_tokens},
          {"reasoning_mode", params.reasoning_mode}}},
        {"alpha", alpha},
        {"tokenizer", tokenizer_id},
        {"schema", schema_path.string()},
        {"prompts", prompts_dir.string()},
        {"style_rubric", style_rubric_path.string()},
        {"method", method},
        {"agent",
         {{"mode", std::string(to_string(agent.mode))},
          {"step_budget", agent.step_budget},
          {"search_top_k", agent.search_top_k},
          {"search_context_tokens", agent.search_context_tokens}}},
        {"chunk_size_tokens", chunk_size},
        {"parse_retries", parse_retries},
        {"workers", workers},
        {"output_dir", output_dir.string()},
        {"seed", seed},
        {"case_total_tokens", case_total_tokens}};
}

void RunConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("config: alpha must be within [0, 1]");
    }
    Tokenizer probe(tokenizer_id); // rejects unknown ids
    (void)probe;
    if (backend.kind != "mock" && backend.kind != "http") {
        throw ConfigError("config: backend.kind must be \"mock\" or \"http\"");
    }
    if (backend.kind == "mock" && !backend.script_path.empty() &&
        !fs::is_regular_file(backend.script_path)) {
        throw ConfigError("config: mock script not found: " + backend.script_path.string());
    }
    if (backend.kind == "http") {
        if (backend.http.base_url.empty()) throw ConfigError("config: backend.base_url is required");
        if (backend.http.model.empty()) throw ConfigError("config: backend.model is required");
    }
    if (schema_path.empty() || !fs::is_regular_file(schema_path)) {
        throw ConfigError("config: schema file not found: " + schema_path.string());
    }
    if (prompts_dir.empty() || !fs::is_directory(prompts_dir)) {
        throw ConfigError("config: prompts directory not found: " + prompts_dir.string());
    }
    if (!style_rubric_path.empty() && !fs::is_regular_file(style_rubric_path)) {
        throw ConfigError("config: style rubric not found: " + style_rubric_path.string());
    }
    static const std::set<std::string> methods = {"ref-eval", "summarize", "e2e", "chunked",
                                                 "agent"};
    if (!methods.count(method)) {
        throw ConfigError("config: unknown method '" + method + "'");
    }
    if (chunk_size == 0) throw ConfigError("config: chunk_size_tokens must be positive");
    if (parse_retries < 0) throw ConfigError("config: parse_retries must be non-negative");
    if (workers < 1) throw ConfigError("config: workers must be at least 1");
    if (output_dir.empty()) throw ConfigError("config: output_dir is required");
    if (agent.step_budget == 0) throw ConfigError("config: agent.step_budget must be positive");
    if (agent.search_top_k == 0) throw ConfigError("config: agent.search_top_k must be positive");
    if (agent.search_context_tokens < kSearchContextMin ||
        agent.search_context_tokens > kSearchContextMax) {
        throw ConfigError("config: agent.search_context_tokens must be within [" +
                          std::to_string(kSearchContextMin) + ", " +
                          std::to_string(kSearchContextMax) + "]");
    }
}

std::string model_label(const RunConfig& config) {
    if (config.backend.kind == "http") return config.backend.http.model;
    if (config.backend.script_path.empty()) return "mock";
    return "mock:" + config.backend.script_path.stem().string();
}

RunContext make_run_context(const RunConfig& config) {
    Tokenizer tokenizer(config.tokenizer_id);
    std::shared_ptr<Backend> backend;
    if (config.backend.kind == "mock") {
        if (config.backend.script_path.empty()) {
            throw ConfigError("config: backend.script is required for the mock backend");
        }
        backend = std::make_shared<MockBackend>(config.backend.script_path, tokenizer,
                                                config.backend.context_limit_tokens);
    } else {
        backend = std::make_shared<HttpBackend>(config.backend.http);
    }
    RunContext ctx{Tokenizer(config.tokenizer_id),
                   std::make_unique<ModelGateway>(std::move(backend), tokenizer, RetryPolicy{}),
                   PromptSet::load(config.prompts_dir),
                   ChecklistSchema::load(config.schema_path),
                   std::string()};
    if (!config.style_rubric_path.empty()) {
        ctx.style_rubric = read_file(config.style_rubric_path);
    }
    return ctx;
}

std::string file_hash(const fs::path& path) { return fnv1a64_hex(read_file(path)); }

void write_json_artifact(const fs::path& path, const nlohmann::json& j) {
    write_text_artifact(path, j.dump(2) + "\n");
}

void write_text_artifact(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, content);
}

nlohmann::json make_run_record(const RunConfig& config, const std::string& command,
                               const std::map<std::string, std::string>& input_hashes,
                               const std::vector<std::string>& outputs,
                               const UsageLedger::Totals& usage, double wall_seconds,
                               const std::string& status, const std::string& error) {
    nlohmann::json record{{"toolkit_version", std::string(kToolkitVersion)},
                          {"command", command},
                          {"model", model_label(config)},
                          {"config", config.to_json()},
                          {"input_hashes", input_hashes},
                          {"outputs", outputs},
                          {"usage",
                           {{"calls", usage.calls},
                            {"input_tokens", usage.input_tokens},
                            {"output_tokens", usage.output_tokens}}},
                          {"wall_seconds", wall_seconds},
                          {"status", status}};
    if (!error.empty()) record["error"] = error;
    return record;
}

} // namespace lexeval
