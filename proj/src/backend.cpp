// SPDX-License-Identifier: Apache-2.0
#include "lexeval/backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

std::size_t UsageLedger::add(const std::string& label, const ModelUsage& usage) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& totals = per_label_[label];
    std::size_t seq = totals.calls;
    totals.calls += 1;
    totals.input_tokens += usage.input_tokens;
    totals.output_tokens += usage.output_tokens;
    return seq;
}

UsageLedger::Totals UsageLedger::total() const {
    std::lock_guard<std::mutex> lock(mu_);
    Totals sum;
    for (const auto& [label, totals] : per_label_) {
        (void)label;
        sum.calls += totals.calls;
        sum.input_tokens += totals.input_tokens;
        sum.output_tokens += totals.output_tokens;
    }
    return sum;
}

UsageLedger::Totals UsageLedger::for_label(const std::string& label) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = per_label_.find(label);
    return it == per_label_.end() ? Totals{} : it->second;
}

std::map<std::string, UsageLedger::Totals> UsageLedger::by_label() const {
    std::lock_guard<std::mutex> lock(mu_);
    return per_label_;
}

nlohmann::json UsageLedger::to_json() const {
    auto snapshot = by_label();
    nlohmann::json labels = nlohmann::json::object();
    Totals sum;
    for (const auto& [label, totals] : snapshot) {
        labels[label] = {{"calls", totals.calls},
                         {"input_tokens", totals.input_tokens},
                         {"output_tokens", totals.output_tokens}};
        sum.calls += totals.calls;
        sum.input_tokens += totals.input_tokens;
        sum.output_tokens += totals.output_tokens;
    }
    return {{"labels", std::move(labels)},
            {"total",
             {{"calls", sum.calls},
              {"input_tokens", sum.input_tokens},
              {"output_tokens", sum.output_tokens}}}};
}

MockBackend::MockBackend(const std::filesystem::path& script_path, Tokenizer tokenizer,
                         std::size_t context_limit)
    : tokenizer_(std::move(tokenizer)), context_limit_(context_limit) {
    nlohmann::json script;
    try {
        script = nlohmann::json::parse(read_file(script_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("mock script " + script_path.string() + " is not valid JSON: " +
                          e.what());
    }
    load_script(script);
}

MockBackend::MockBackend(const nlohmann::json& script, Tokenizer tokenizer,
                         std::size_t context_limit)
    : tokenizer_(std::move(tokenizer)), context_limit_(context_limit) {
    load_script(script);
}

void MockBackend::load_script(const nlohmann::json& script) {
    if (!script.is_object())
        throw ConfigError("mock script must be a JSON object");
    if (script.contains("name") && script["name"].is_string())
        name_ = script["name"].get<std::string>();
    if (script.contains("rules")) {
        if (!script["rules"].is_array())
            throw ConfigError("mock script 'rules' must be an array");
        for (const auto& r : script["rules"]) {
            Rule rule;
            rule.name = r.value("name", "rule_" + std::to_string(rules_.size()));
            if (r.contains("match")) {
                const auto& m = r["match"];
                for (const auto& s : m.value("user_contains", nlohmann::json::array()))
                    rule.user_contains.push_back(s.get<std::string>());
                for (const auto& s : m.value("system_contains", nlohmann::json::array()))
                    rule.system_contains.push_back(s.get<std::string>());
            }
            if (r.contains("reply") && r.contains("replies"))
                throw ConfigError("mock rule '" + rule.name +
                                  "' has both 'reply' and 'replies'");
            if (r.contains("reply")) {
                rule.replies.push_back(r["reply"].get<std::string>());
                rule.cycle = true; // a single reply answers every hit
            } else if (r.contains("replies")) {
                for (const auto& s : r["replies"]) rule.replies.push_back(s.get<std::string>());
                rule.cycle = r.value("cycle", false);
            } else {
                throw ConfigError("mock rule '" + rule.name + "' has no reply");
            }
            if (rule.replies.empty())
                throw ConfigError("mock rule '" + rule.name + "' has an empty reply list");
            rule.fail_times = r.value("fail_times", 0);
            rule.failures_left = rule.fail_times;
            rules_.push_back(std::move(rule));
        }
    }
    if (script.contains("default_reply")) {
        has_default_ = true;
        default_reply_ = script["default_reply"].get<std::string>();
    }
}

ModelResponse MockBackend::make_response(const ModelRequest& request,
                                         const std::string& reply) const {
    ModelResponse response;
    response.text = reply;
    response.usage.input_tokens =
        tokenizer_.count(request.system) + tokenizer_.count(request.user);
    response.usage.output_tokens = tokenizer_.count(reply);
    return response;
}

ModelResponse MockBackend::complete_once(const ModelRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& rule : rules_) {
        bool hit = true;
        for (const auto& s : rule.user_contains)
            if (request.user.find(s) == std::string::npos) { hit = false; break; }
        if (hit)
            for (const auto& s : rule.system_contains)
                if (request.system.find(s) == std::string::npos) { hit = false; break; }
        if (!hit) continue;
        if (rule.failures_left > 0) {
            rule.failures_left -= 1;
            throw TransportError("mock rule '" + rule.name + "' scripted failure");
        }
        if (rule.next_reply >= rule.replies.size()) {
            if (!rule.cycle)
                throw ConfigError("mock rule '" + rule.name + "' reply sequence exhausted");
            rule.next_reply = 0;
        }
        return make_response(request, rule.replies[rule.next_reply++]);
    }
    if (has_default_) return make_response(request, default_reply_);
    throw ConfigError("mock script has no rule matching the request (user starts: \"" +
                      request.user.substr(0, 120) + "\")");
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
        throw ConfigError("http backend needs a base_url");
    if (config_.model.empty())
        throw ConfigError("http backend needs a model name");
}

ModelResponse HttpBackend::complete_once(const ModelRequest& request) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_seconds), 0);

    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key)
            throw BackendUnavailable("environment variable " + config_.api_key_env +
                                     " is not set");
        client.set_bearer_token_auth(key);
    }

    nlohmann::json messages = nlohmann::json::array();
    if (!request.system.empty())
        messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    nlohmann::json body = {{"model", config_.model},
                           {"messages", std::move(messages)},
                           {"temperature", request.params.temperature},
                           {"top_p", request.params.top_p},
                           {"max_tokens", request.params.max_output_tokens}};
    if (!request.params.reasoning_mode.empty())
        body["reasoning_effort"] = request.params.reasoning_mode;

    auto result = client.Post(config_.path, body.dump(), "application/json");
    if (!result)
        throw TransportError("connection to " + config_.base_url + " failed: " +
                             httplib::to_string(result.error()));
    if (result->status == 429 || result->status >= 500)
        throw TransportError("backend returned status " + std::to_string(result->status));
    if (result->status != 200)
        throw BackendUnavailable("backend returned status " + std::to_string(result->status) +
                                 ": " + result->body.substr(0, 300));

    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::parse_error&) {
        throw TransportError("backend returned unparseable body");
    }
    ModelResponse response;
    try {
        response.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw BackendUnavailable("backend reply lacks choices[0].message.content");
    }
    if (reply.contains("usage") && reply["usage"].is_object()) {
        const auto& usage = reply["usage"];
        response.usage.input_tokens = usage.value("prompt_tokens", 0);
        response.usage.output_tokens = usage.value("completion_tokens", 0);
    }
    return response;
}

} // namespace lexeval
