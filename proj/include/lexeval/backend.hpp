// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexeval/tokenizer.hpp"

namespace lexeval {

struct ModelUsage {
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
};

struct ModelParams {
    double temperature = 0.7;
    double top_p = 1.0;
    std::size_t max_output_tokens = 8192;
    std::string reasoning_mode; // empty = backend default
};

struct ModelRequest {
    std::string system; // empty = no system message
    std::string user;
    ModelParams params;
};

struct ModelResponse {
    std::string text;
    ModelUsage usage;
};

/// Transient transport failure (connect refused, 429, 5xx, scripted fault).
/// Internal to the gateway's retry loop; callers see BackendUnavailable once
/// retries are exhausted.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Backend {
public:
    virtual ~Backend() = default;

    /// One completion attempt, no retries. Throws TransportError on transient
    /// faults and BackendUnavailable on permanent ones.
    virtual ModelResponse complete_once(const ModelRequest& request) = 0;

    virtual const std::string& name() const = 0;

    /// Declared input budget in tokens; 0 means unchecked.
    virtual std::size_t context_limit_tokens() const = 0;
};

// Per-label running totals. add() returns the 0-based sequence number of the
// call within its label, which keeps transcript ordering stable even when
// concurrent workers interleave.
class UsageLedger {
public:
    struct Totals {
        std::uint64_t calls = 0;
        std::uint64_t input_tokens = 0;
        std::uint64_t output_tokens = 0;
    };

    std::size_t add(const std::string& label, const ModelUsage& usage);
    Totals total() const;
    Totals for_label(const std::string& label) const;
    std::map<std::string, Totals> by_label() const;
    nlohmann::json to_json() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, Totals> per_label_;
};

// Deterministic scripted backend. Script file shape:
//   {
//     "rules": [
//       {"name": "...",
//        "match": {"user_contains": ["..."], "system_contains": ["..."]},
//        "reply": "..." | "replies": ["...", ...], "cycle": false,
//        "fail_times": 0}
//     ],
//     "default_reply": "..."
//   }
// The first rule whose substrings all appear wins. "replies" rules hand out
// their entries sequentially (exhaustion is an error unless cycle is set), so
// they are only deterministic for sequential callers; single-"reply" rules
// are pure functions of the request and stay deterministic under any worker
// count. "fail_times" makes the rule throw TransportError that many times
// before succeeding. Usage is counted with the supplied tokenizer.
class MockBackend : public Backend {
public:
    MockBackend(const std::filesystem::path& script_path, Tokenizer tokenizer,
                std::size_t context_limit = 0);
    MockBackend(const nlohmann::json& script, Tokenizer tokenizer,
                std::size_t context_limit = 0);

    ModelResponse complete_once(const ModelRequest& request) override;
    const std::string& name() const override { return name_; }
    std::size_t context_limit_tokens() const override { return context_limit_; }

private:
    struct Rule {
        std::string name;
        std::vector<std::string> user_contains;
        std::vector<std::string> system_contains;
        std::vector<std::string> replies;
        bool cycle = false;
        std::size_t fail_times = 0;
        // Mutable call-order state, guarded by mu_.
        std::size_t next_reply = 0;
        std::size_t failures_left = 0;
    };

    void load_script(const nlohmann::json& script);
    ModelResponse make_response(const ModelRequest& request, const std::string& reply) const;

    std::string name_ = "mock";
    Tokenizer tokenizer_;
    std::size_t context_limit_ = 0;
    std::mutex mu_;
    std::vector<Rule> rules_;
    bool has_default_ = false;
    std::string default_reply_;
};

// Chat-completion HTTP backend. The bearer token is read from the named
// environment variable at call time; config files never carry the secret.
struct HttpBackendConfig {
    std::string base_url;                        // e.g. "https://api.example.com"
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;                     // name of the env var, may be empty
    std::size_t timeout_seconds = 120;
    std::size_t context_limit_tokens = 0;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    ModelResponse complete_once(const ModelRequest& request) override;
    const std::string& name() const override { return config_.model; }
    std::size_t context_limit_tokens() const override { return config_.context_limit_tokens; }

private:
    HttpBackendConfig config_;
};

} // namespace lexeval
