// SPDX-License-Identifier: Apache-2.0
#include "lexeval/doc_extract.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "lexeval/errors.hpp"
#include "lexeval/rx.hpp"
#include "lexeval/structured_parse.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

namespace {

nlohmann::json error_payload(const std::string& message) {
    return nlohmann::json{{"error", message}};
}

std::string count_noun(std::size_t n, const char* noun) {
    std::ostringstream out;
    out << n << ' ' << noun;
    if (n != 1) out << 's';
    return out.str();
}

// Inclusive display form of a half-open token range, matching the
// "Viewed tokens: X-Y" convention of the agent prompt.
std::string range_label(std::size_t begin, std::size_t end) {
    std::ostringstream out;
    out << begin << '-' << (end == begin ? begin : end - 1);
    return out.str();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace

std::string to_string(AgentMode mode) {
    switch (mode) {
        case AgentMode::OneAgentAll: return "one_agent_all";
        case AgentMode::NineByGroup: return "nine_by_group";
        case AgentMode::TwentySixIndividual: return "twenty_six_individual";
    }
    return "unknown";
}

AgentMode agent_mode_from_string(std::string_view name) {
    if (name == "one_agent_all") return AgentMode::OneAgentAll;
    if (name == "nine_by_group") return AgentMode::NineByGroup;
    if (name == "twenty_six_individual") return AgentMode::TwentySixIndividual;
    throw ConfigError("unknown agent mode '" + std::string(name) +
                      "' (expected one_agent_all, nine_by_group, or twenty_six_individual)");
}

nlohmann::json AgentStepRecord::to_json() const {
    return nlohmann::json{{"step_index", step_index},
                          {"snapshot_hash", snapshot_hash},
                          {"action", action},
                          {"response_hash", response_hash},
                          {"usage",
                           {{"input_tokens", usage.input_tokens},
                            {"output_tokens", usage.output_tokens}}}};
}

void AgentTrace::record_view(const std::string& doc_name, std::size_t begin, std::size_t end) {
    if (begin >= end) return;
    auto& ranges = viewed_ranges[doc_name];
    ranges.push_back({begin, end});
    std::sort(ranges.begin(), ranges.end(),
              [](const TokenRange& a, const TokenRange& b) { return a.begin < b.begin; });
    std::vector<TokenRange> merged;
    for (const auto& r : ranges) {
        if (!merged.empty() && r.begin <= merged.back().end)
            merged.back().end = std::max(merged.back().end, r.end);
        else
            merged.push_back(r);
    }
    ranges = std::move(merged);
}

std::size_t AgentTrace::covered_tokens(const std::string& doc_name) const {
    auto it = viewed_ranges.find(doc_name);
    if (it == viewed_ranges.end()) return 0;
    std::size_t total = 0;
    for (const auto& r : it->second) total += r.end - r.begin;
    return total;
}

bool AgentTrace::fully_visited(const CaseDocument& doc) const {
    if (doc.token_count == 0) return true;
    auto it = viewed_ranges.find(doc.name);
    if (it == viewed_ranges.end() || it->second.size() != 1) return false;
    return it->second.front().begin == 0 && it->second.front().end >= doc.token_count;
}

nlohmann::json AgentTrace::to_json() const {
    nlohmann::json calls_json = nlohmann::json::array();
    for (const auto& call : calls)
        calls_json.push_back({{"step_index", call.step_index},
                              {"name", call.name},
                              {"args", call.args},
                              {"response", call.response},
                              {"outcome_summary", call.outcome_summary}});
    nlohmann::json ranges_json = nlohmann::json::object();
    for (const auto& [doc, ranges] : viewed_ranges) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& r : ranges) list.push_back({r.begin, r.end});
        ranges_json[doc] = std::move(list);
    }
    return nlohmann::json{{"cell", cell},
                          {"item_ids", item_ids},
                          {"calls", calls_json},
                          {"viewed_ranges", ranges_json},
                          {"usage",
                           {{"input_tokens", usage.input_tokens},
                            {"output_tokens", usage.output_tokens}}},
                          {"terminal", terminal},
                          {"stop_reason", stop_reason},
                          {"error_message", error_message}};
}

nlohmann::json AgentTrace::log_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& record : log) out.push_back(record.to_json());
    return out;
}

bool is_tool_error(const nlohmann::json& payload) {
    return payload.is_object() && payload.contains("error");
}

nlohmann::json tool_list_documents(const CaseCorpus& corpus) {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& doc : corpus.documents)
        docs.push_back({{"name", doc.name},
                        {"doc_type", doc.doc_type},
                        {"token_count", doc.token_count},
                        {"filing_order", doc.filing_order}});
    return nlohmann::json{{"documents", std::move(docs)}};
}

nlohmann::json tool_read_document(const CaseCorpus& corpus, const std::string& doc_name,
                                  std::size_t start_token, std::size_t end_token,
                                  AgentTrace* trace) {
    const CaseDocument* doc = corpus.find(doc_name);
    if (!doc) return error_payload("unknown document '" + doc_name + "'");
    if (start_token >= end_token)
        return error_payload("start_token must be less than end_token");

    nlohmann::json payload{{"document", doc->name}};
    if (start_token >= doc->token_count) {
        payload["start_token"] = start_token;
        payload["end_token"] = start_token;
        payload["token_count"] = 0;
        payload["text"] = "";
        std::ostringstream notice;
        notice << "start_token " << start_token << " is at or past the end of the document ("
               << doc->token_count << " tokens)";
        payload["notice"] = notice.str();
        return payload;
    }

    std::size_t end = std::min({end_token, start_token + kReadCapTokens, doc->token_count});
    payload["start_token"] = start_token;
    payload["end_token"] = end;
    payload["token_count"] = end - start_token;
    payload["text"] = token_range_text(*doc, start_token, end);
    if (end < end_token && end == start_token + kReadCapTokens) {
        std::ostringstream notice;
        notice << "window clipped to the " << kReadCapTokens << "-token read cap";
        payload["notice"] = notice.str();
    }
    if (trace) trace->record_view(doc->name, start_token, end);
    return payload;
}

nlohmann::json tool_search_document_regex(const CaseCorpus& corpus, const std::string& pattern,
                                          const std::vector<std::string>& doc_scope,
                                          std::size_t top_k, std::size_t context_tokens,
                                          AgentTrace* trace) {
    if (top_k == 0) return error_payload("top_k must be positive");
    if (context_tokens < kSearchContextMin || context_tokens > kSearchContextMax) {
        std::ostringstream msg;
        msg << "context_tokens must be between " << kSearchContextMin << " and "
            << kSearchContextMax << " (got " << context_tokens << ")";
        return error_payload(msg.str());
    }
    std::set<std::string> scope(doc_scope.begin(), doc_scope.end());
    for (const auto& name : scope)
        if (!corpus.find(name)) return error_payload("unknown document '" + name + "'");

    std::optional<rx::Regex> regex;
    try {
        regex = rx::Regex::compile(pattern);
    } catch (const ParseError& e) {
        return error_payload(e.what());
    }
    nlohmann::json matches = nlohmann::json::array();
    std::size_t total_matches = 0;
    for (const auto& doc : corpus.documents) {
        if (!scope.empty() && !scope.count(doc.name)) continue;
        if (doc.token_count == 0) continue;
        auto found = regex->find_all(doc.text);
        for (const auto& m : found) {
            ++total_matches;
            if (matches.size() >= top_k) continue;
            std::size_t token_begin = token_index_at_byte(doc, m.begin);
            std::size_t token_end =
                m.end > m.begin ? token_index_at_byte(doc, m.end - 1) + 1 : token_begin;
            std::size_t half = context_tokens / 2;
            std::size_t ctx_begin = token_begin > half ? token_begin - half : 0;
            std::size_t ctx_end = std::max(token_begin + (context_tokens - half), token_end);
            ctx_end = std::min(ctx_end, doc.token_count);
            matches.push_back({{"document", doc.name},
                               {"match_text", doc.text.substr(m.begin, m.end - m.begin)},
                               {"match_begin_token", token_begin},
                               {"match_end_token", token_end},
                               {"context_begin_token", ctx_begin},
                               {"context_end_token", ctx_end},
                               {"context_text", token_range_text(doc, ctx_begin, ctx_end)}});
            if (trace) trace->record_view(doc.name, ctx_begin, ctx_end);
        }
    }
    nlohmann::json payload{{"pattern", pattern},
                           {"total_matches", total_matches},
                           {"matches", std::move(matches)}};
    if (total_matches > top_k) {
        std::ostringstream notice;
        notice << "showing the first " << top_k << " of " << total_matches << " matches";
        payload["notice"] = notice.str();
    }
    return payload;
}

namespace {

// Empty when the id passes; otherwise the error payload to return.
std::optional<nlohmann::json> check_scope(const ChecklistSchema& schema,
                                          const std::vector<std::string>& scope,
                                          const std::string& item_id) {
    if (!schema.has(item_id))
        return error_payload("unknown checklist item '" + item_id + "'");
    if (std::find(scope.begin(), scope.end(), item_id) == scope.end())
        return error_payload("checklist item '" + item_id + "' is out of scope for this agent");
    return std::nullopt;
}

nlohmann::json apply_checklist_change(const ChecklistSchema& schema, ChecklistState& state,
                                      const std::vector<std::string>& scope,
                                      const nlohmann::json& changes, PatchMode mode) {
    if (!changes.is_object() || changes.empty())
        return error_payload("'changes' must be an object naming at least one checklist item");
    ChecklistPatch patch;
    patch.mode = mode;
    for (const auto& [item_id, values_json] : changes.items()) {
        if (auto err = check_scope(schema, scope, item_id)) return *err;
        try {
            patch.changes.emplace_back(item_id, values_from_json(values_json));
        } catch (const ParseError& e) {
            return error_payload("item '" + item_id + "': " + e.what());
        }
    }
    try {
        state = apply_patch(schema, state, patch);
    } catch (const SchemaViolation& e) {
        return error_payload(e.what());
    } catch (const ProtocolViolation& e) {
        return error_payload(e.what());
    }

    std::size_t value_count = 0;
    std::vector<std::string> item_names;
    for (const auto& [item_id, values] : patch.changes) {
        value_count += values.size();
        item_names.push_back(item_id);
    }
    std::ostringstream summary;
    if (mode == PatchMode::Append)
        summary << "appended " << count_noun(value_count, "value") << " to "
                << join(item_names, ", ");
    else
        summary << "updated " << join(item_names, ", ") << " ("
                << count_noun(value_count, "value") << ")";
    return nlohmann::json{{"result", summary.str()}};
}

} // namespace

nlohmann::json tool_get_checklist(const ChecklistSchema& schema, const ChecklistState& state,
                                  const std::vector<std::string>& scope,
                                  const std::vector<std::string>& item_ids) {
    if (item_ids.empty()) return error_payload("item_ids must name at least one checklist item");
    for (const auto& id : item_ids)
        if (auto err = check_scope(schema, scope, id)) return *err;
    nlohmann::json items = nlohmann::json::object();
    for (const auto& id : item_ids)
        items[id] = state.has(id) ? values_to_json(state.values(id)) : nlohmann::json::array();
    return nlohmann::json{{"items", std::move(items)}};
}

nlohmann::json tool_append_checklist(const ChecklistSchema& schema, ChecklistState& state,
                                     const std::vector<std::string>& scope,
                                     const nlohmann::json& changes) {
    return apply_checklist_change(schema, state, scope, changes, PatchMode::Append);
}

nlohmann::json tool_update_checklist(const ChecklistSchema& schema, ChecklistState& state,
                                     const std::vector<std::string>& scope,
                                     const nlohmann::json& changes) {
    return apply_checklist_change(schema, state, scope, changes, PatchMode::Update);
}

std::string Snapshot::hash() const {
    return fnv1a64_hex(system_text + "\x1f" + user_text);
}

std::string render_agent_system(const PromptSet& prompts) {
    return prompts.get("agent_system")
        .render({{"TOOL_DESCRIPTIONS", prompts.get("tool_descriptions").body()}});
}

namespace {

std::string render_definitions(const ChecklistSchema& schema,
                               const std::vector<std::string>& item_ids) {
    std::set<std::string_view> in_scope(item_ids.begin(), item_ids.end());
    std::ostringstream out;
    std::string current_group;
    std::size_t number = 0;
    bool first_group = true;
    for (const auto& def : schema.items()) {
        if (!in_scope.count(def.item_id)) continue;
        if (def.group != current_group) {
            if (!first_group) out << '\n';
            out << def.group << '\n';
            current_group = def.group;
            first_group = false;
        }
        out << ++number << ". " << format_item_definition(def) << '\n';
    }
    return out.str();
}

std::string render_catalog(const CaseCorpus& corpus, const AgentTrace& trace) {
    std::ostringstream out;
    out << "Catalog state: " << count_noun(corpus.documents.size(), "document") << ", "
        << corpus.total_tokens << " tokens total (version 1)\n";
    std::size_t number = 0;
    for (const auto& doc : corpus.documents) {
        out << ++number << ". " << doc.name << " (type: " << doc.doc_type << ", "
            << doc.token_count << " tokens, filing order " << doc.filing_order << ") - ";
        if (trace.fully_visited(doc)) {
            out << "Fully Visited\n";
        } else if (trace.covered_tokens(doc.name) > 0) {
            out << "Partially Visited\n   Viewed tokens: ";
            const auto& ranges = trace.viewed_ranges.at(doc.name);
            for (std::size_t i = 0; i < ranges.size(); ++i) {
                if (i) out << ", ";
                out << range_label(ranges[i].begin, ranges[i].end);
            }
            out << '\n';
        } else {
            out << "Not Visited\n";
        }
    }
    if (corpus.documents.empty()) out << "(no documents)\n";
    return out.str();
}

std::string render_checklist_summary(const ChecklistSchema& schema,
                                     const std::vector<std::string>& item_ids,
                                     const ChecklistState& state) {
    std::set<std::string_view> in_scope(item_ids.begin(), item_ids.end());
    std::ostringstream out;
    for (const auto& def : schema.items()) {
        if (!in_scope.count(def.item_id)) continue;
        out << "- " << def.item_id << " (" << def.display_name << "): ";
        switch (item_status(schema, state, def.item_id)) {
            case ItemStatus::Empty: out << "empty"; break;
            case ItemStatus::Filled:
                out << "filled, " << count_noun(state.values(def.item_id).size(), "value");
                break;
            case ItemStatus::NotApplicable: out << "Not Applicable"; break;
        }
        out << '\n';
    }
    return out.str();
}

std::string render_history(const AgentTrace& trace) {
    std::ostringstream out;
    if (trace.calls.empty()) {
        out << "(no actions yet)\n";
        return out.str();
    }
    std::size_t total = trace.calls.size();
    std::size_t window = std::min(total, kHistoryWindow);
    std::size_t first = total - window;
    std::size_t full_from = total - std::min(total, kFullResponseEntries);
    out << "(oldest first; the newest " << std::min(total, kFullResponseEntries)
        << " include full responses)\n";
    for (std::size_t i = first; i < total; ++i) {
        const ToolCall& call = trace.calls[i];
        if (i < full_from) {
            out << "step " << call.step_index << ": " << call.name << " -> "
                << call.outcome_summary << '\n';
        } else {
            out << "step " << call.step_index << ": " << call.name << ' ' << call.args.dump()
                << "\n  -> " << call.outcome_summary << "\n  response: " << call.response.dump()
                << '\n';
        }
    }
    return out.str();
}

} // namespace

Snapshot build_snapshot(const PromptSet& prompts, const ChecklistSchema& schema,
                        const std::vector<std::string>& item_ids, const CaseCorpus& corpus,
                        const ChecklistState& state, const AgentTrace& trace) {
    Snapshot snap;
    snap.system_text = render_agent_system(prompts);
    std::ostringstream user;
    user << "# Task\n"
         << "Extract every checklist item listed below from the case documents, citing "
            "verbatim evidence for each value. Use update_checklist to mark items the "
            "case genuinely rules out as \"Not Applicable\". Stop once every item is "
            "complete.\n\n";
    user << "# Checklist Definitions\n" << render_definitions(schema, item_ids) << '\n';
    user << "# Document Catalog\n" << render_catalog(corpus, trace) << '\n';
    user << "# Checklist Summary\n" << render_checklist_summary(schema, item_ids, state) << '\n';
    user << "# Recent Actions\n" << render_history(trace);
    snap.user_text = user.str();
    return snap;
}

namespace {

void validate_agent_config(const AgentConfig& config) {
    if (config.step_budget == 0) throw ConfigError("step_budget must be positive");
    if (config.search_top_k == 0) throw ConfigError("search_top_k must be positive");
    if (config.search_context_tokens < kSearchContextMin ||
        config.search_context_tokens > kSearchContextMax) {
        std::ostringstream msg;
        msg << "search_context_tokens must be between " << kSearchContextMin << " and "
            << kSearchContextMax;
        throw ConfigError(msg.str());
    }
}

void validate_cell_items(const ChecklistSchema& schema,
                         const std::vector<std::string>& item_ids) {
    if (item_ids.empty()) throw ConfigError("agent cell has no checklist items");
    std::set<std::string_view> seen;
    for (const auto& id : item_ids) {
        schema.item(id); // throws SchemaViolation on unknown ids
        if (!seen.insert(id).second)
            throw ConfigError("agent cell lists item '" + id + "' twice");
    }
}

bool read_uint_arg(const nlohmann::json& args, const char* key, std::size_t& out,
                   std::string& error) {
    if (!args.contains(key)) {
        error = std::string("missing integer argument '") + key + "'";
        return false;
    }
    const auto& v = args.at(key);
    if (v.is_number_unsigned()) {
        out = v.get<std::size_t>();
        return true;
    }
    if (v.is_number_integer() && v.get<long long>() >= 0) {
        out = static_cast<std::size_t>(v.get<long long>());
        return true;
    }
    error = std::string("argument '") + key + "' must be a non-negative integer";
    return false;
}

bool read_string_arg(const nlohmann::json& args, const char* key, std::string& out,
                     std::string& error) {
    if (!args.contains(key) || !args.at(key).is_string()) {
        error = std::string("missing string argument '") + key + "'";
        return false;
    }
    out = args.at(key).get<std::string>();
    return true;
}

bool read_string_list_arg(const nlohmann::json& args, const char* key,
                          std::vector<std::string>& out, std::string& error) {
    if (!args.contains(key)) {
        error = std::string("missing list argument '") + key + "'";
        return false;
    }
    const auto& v = args.at(key);
    if (!v.is_array()) {
        error = std::string("argument '") + key + "' must be a list of strings";
        return false;
    }
    out.clear();
    for (const auto& entry : v) {
        if (!entry.is_string()) {
            error = std::string("argument '") + key + "' must be a list of strings";
            return false;
        }
        out.push_back(entry.get<std::string>());
    }
    return true;
}

struct DispatchResult {
    nlohmann::json payload;
    std::string outcome;
};

std::string describe_read(const nlohmann::json& payload) {
    std::ostringstream out;
    if (payload["token_count"].get<std::size_t>() == 0) {
        out << "read " << payload["document"].get<std::string>() << ": empty window";
    } else {
        out << "read " << payload["document"].get<std::string>() << " tokens "
            << range_label(payload["start_token"].get<std::size_t>(),
                           payload["end_token"].get<std::size_t>());
        if (payload.contains("notice")) out << " (clipped)";
    }
    return out.str();
}

std::string describe_search(const nlohmann::json& payload) {
    std::ostringstream out;
    std::size_t total = payload["total_matches"].get<std::size_t>();
    if (total == 0)
        out << "no matches";
    else if (total == 1)
        out << "1 match";
    else
        out << total << " matches";
    out << " for pattern " << payload["pattern"].get<std::string>();
    if (payload.contains("notice"))
        out << " (showing the first " << payload["matches"].size() << ")";
    return out.str();
}

DispatchResult dispatch_tool(const AgentAction& action, const ChecklistSchema& schema,
                             const std::vector<std::string>& item_ids, const CaseCorpus& corpus,
                             ChecklistState& state, const AgentConfig& config,
                             AgentTrace& trace) {
    const nlohmann::json& args = action.args;
    std::string error;
    if (action.tool == "list_documents") {
        auto payload = tool_list_documents(corpus);
        std::string outcome = "listed " + count_noun(payload["documents"].size(), "document");
        return {std::move(payload), std::move(outcome)};
    }
    if (action.tool == "read_document") {
        std::string doc_name;
        std::size_t start = 0;
        std::size_t end = 0;
        if (!read_string_arg(args, "document_name", doc_name, error) ||
            !read_uint_arg(args, "start_token", start, error) ||
            !read_uint_arg(args, "end_token", end, error))
            return {error_payload(error), "tool error: " + error};
        auto payload = tool_read_document(corpus, doc_name, start, end, &trace);
        if (is_tool_error(payload)) {
            std::string msg = payload["error"].get<std::string>();
            return {std::move(payload), "tool error: " + msg};
        }
        std::string outcome = describe_read(payload);
        return {std::move(payload), std::move(outcome)};
    }
    if (action.tool == "search_document_regex") {
        std::string pattern;
        if (!read_string_arg(args, "pattern", pattern, error))
            return {error_payload(error), "tool error: " + error};
        std::vector<std::string> doc_scope;
        if (args.contains("document_names") &&
            !read_string_list_arg(args, "document_names", doc_scope, error))
            return {error_payload(error), "tool error: " + error};
        std::size_t top_k = config.search_top_k;
        if (args.contains("top_k") && !read_uint_arg(args, "top_k", top_k, error))
            return {error_payload(error), "tool error: " + error};
        std::size_t context = config.search_context_tokens;
        if (args.contains("context_tokens") &&
            !read_uint_arg(args, "context_tokens", context, error))
            return {error_payload(error), "tool error: " + error};
        auto payload = tool_search_document_regex(corpus, pattern, doc_scope, top_k, context,
                                                  &trace);
        if (is_tool_error(payload)) {
            std::string msg = payload["error"].get<std::string>();
            return {std::move(payload), "tool error: " + msg};
        }
        std::string outcome = describe_search(payload);
        return {std::move(payload), std::move(outcome)};
    }
    if (action.tool == "get_checklist") {
        std::vector<std::string> ids;
        if (!read_string_list_arg(args, "item_ids", ids, error))
            return {error_payload(error), "tool error: " + error};
        auto payload = tool_get_checklist(schema, state, item_ids, ids);
        if (is_tool_error(payload)) {
            std::string msg = payload["error"].get<std::string>();
            return {std::move(payload), "tool error: " + msg};
        }
        return {std::move(payload), "fetched " + count_noun(ids.size(), "item")};
    }
    if (action.tool == "append_checklist" || action.tool == "update_checklist") {
        if (!args.contains("changes"))
            return {error_payload("missing object argument 'changes'"),
                    "tool error: missing object argument 'changes'"};
        nlohmann::json payload =
            action.tool == "append_checklist"
                ? tool_append_checklist(schema, state, item_ids, args.at("changes"))
                : tool_update_checklist(schema, state, item_ids, args.at("changes"));
        if (is_tool_error(payload)) {
            std::string msg = payload["error"].get<std::string>();
            return {std::move(payload), "tool error: " + msg};
        }
        std::string outcome = payload["result"].get<std::string>();
        return {std::move(payload), std::move(outcome)};
    }
    std::string msg = "unknown tool '" + action.tool + "'";
    return {error_payload(msg), "tool error: " + msg};
}

} // namespace

AgentRunResult run_agent(ModelGateway& gateway, const PromptSet& prompts,
                         const ChecklistSchema& schema, const std::vector<std::string>& item_ids,
                         const CaseCorpus& corpus, const AgentConfig& config,
                         const std::string& cell_label) {
    validate_agent_config(config);
    validate_cell_items(schema, item_ids);

    AgentRunResult result;
    AgentTrace& trace = result.trace;
    trace.cell = cell_label;
    trace.item_ids = item_ids;
    trace.terminal = "step-budget-exhausted";

    while (trace.calls.size() < config.step_budget) {
        Snapshot snap = build_snapshot(prompts, schema, item_ids, corpus, result.state, trace);
        ModelRequest request;
        request.system = snap.system_text;
        request.user = snap.user_text;
        request.params = config.params;

        ModelResponse response;
        try {
            response = gateway.complete(request, cell_label);
        } catch (const BackendUnavailable& e) {
            trace.terminal = "error";
            trace.error_message = e.what();
            return result;
        } catch (const ContextOverflow& e) {
            trace.terminal = "error";
            trace.error_message = e.what();
            return result;
        }
        trace.usage.input_tokens += response.usage.input_tokens;
        trace.usage.output_tokens += response.usage.output_tokens;

        AgentStepRecord record;
        record.step_index = trace.calls.size();
        record.snapshot_hash = snap.hash();
        record.response_hash = fnv1a64_hex(response.text);
        record.usage = response.usage;

        AgentAction action;
        try {
            action = parse_agent_action(response.text);
        } catch (const ParseError& e) {
            std::string msg = std::string("invalid action: ") + e.what() +
                              "; reply with exactly one JSON object, either a tool call "
                              "{\"name\", \"args\"} or {\"decision\": \"stop\", \"reason\"}";
            record.action = nlohmann::json{{"format_error", e.what()}};
            trace.log.push_back(record);
            trace.calls.push_back({"invalid_action", nlohmann::json::object(),
                                   error_payload(msg), "invalid action consumed this step",
                                   record.step_index});
            continue;
        }

        if (action.is_stop) {
            record.action = nlohmann::json{{"decision", "stop"}, {"reason", action.stop_reason}};
            trace.log.push_back(record);
            trace.terminal = "stop";
            trace.stop_reason = action.stop_reason;
            return result;
        }

        record.action = nlohmann::json{{"name", action.tool}, {"args", action.args}};
        trace.log.push_back(record);
        DispatchResult dispatched =
            dispatch_tool(action, schema, item_ids, corpus, result.state, config, trace);
        trace.calls.push_back({action.tool, action.args, std::move(dispatched.payload),
                               std::move(dispatched.outcome), record.step_index});
    }
    return result;
}

OrchestrationResult orchestrate_agents(ModelGateway& gateway, const PromptSet& prompts,
                                       const ChecklistSchema& schema, const CaseCorpus& corpus,
                                       const AgentConfig& config) {
    validate_agent_config(config);

    std::vector<std::pair<std::string, std::vector<std::string>>> cells;
    if (config.mode == AgentMode::OneAgentAll) {
        std::vector<std::string> all;
        for (const auto& def : schema.items()) all.push_back(def.item_id);
        cells.emplace_back("agent:all", std::move(all));
    } else if (config.mode == AgentMode::NineByGroup) {
        for (auto& [group, ids] : schema.group_partition())
            cells.emplace_back("agent:group:" + group, std::move(ids));
    } else {
        for (const auto& def : schema.items())
            cells.emplace_back("agent:item:" + def.item_id,
                               std::vector<std::string>{def.item_id});
    }

    OrchestrationResult result;
    for (const auto& [label, ids] : cells) {
        AgentRunResult cell = run_agent(gateway, prompts, schema, ids, corpus, config, label);
        result.usage.input_tokens += cell.trace.usage.input_tokens;
        result.usage.output_tokens += cell.trace.usage.output_tokens;
        for (const auto& id : ids) {
            if (cell.state.has(id)) result.state.set(id, cell.state.values(id));
            if (cell.trace.terminal == "error")
                result.item_errors[id] = cell.trace.error_message;
        }
        result.traces.push_back(std::move(cell.trace));
    }
    return result;
}

namespace {

// Extraction pipelines assemble state directly, so the evidence protocol is
// enforced here: every kept value cites at least one evidence entry whose
// text is verbatim-nonempty and names a source document.
std::vector<ExtractedValue> keep_cited_values(std::vector<ExtractedValue> values,
                                              std::vector<std::string>* notes) {
    std::vector<ExtractedValue> kept;
    for (auto& value : values) {
        if (value.value.empty()) {
            if (notes) notes->push_back("dropped a value with empty text");
            continue;
        }
        if (value.evidence.empty()) {
            if (notes) notes->push_back("dropped value '" + value.value + "': no evidence cited");
            continue;
        }
        bool cited = true;
        for (const auto& ev : value.evidence) {
            if (ev.text.empty()) {
                if (notes)
                    notes->push_back("dropped value '" + value.value +
                                     "': evidence with empty text");
                cited = false;
                break;
            }
            if (ev.source.empty()) {
                if (notes)
                    notes->push_back("dropped value '" + value.value +
                                     "': evidence missing source_document");
                cited = false;
                break;
            }
        }
        if (cited) kept.push_back(std::move(value));
    }
    return kept;
}

std::optional<ParsedExtraction> parse_with_retries(ModelGateway& gateway,
                                                   const ModelRequest& request,
                                                   const std::string& label, int parse_retries,
                                                   std::vector<std::string>* notes) {
    int attempts = parse_retries < 0 ? 1 : parse_retries + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        ModelResponse response = gateway.complete(request, label);
        try {
            return parse_extraction(response.text, EvidenceShape::Objects);
        } catch (const ParseError& e) {
            if (notes) {
                std::ostringstream note;
                note << label << " attempt " << attempt << ": " << e.what();
                notes->push_back(note.str());
            }
        }
    }
    return std::nullopt;
}

} // namespace

ExtractionOutcome extract_end_to_end(ModelGateway& gateway, const PromptSet& prompts,
                                     const ChecklistSchema& schema, const CaseCorpus& corpus,
                                     const ModelParams& params, int parse_retries,
                                     std::size_t workers) {
    const PromptTemplate& tpl = prompts.get("e2e_extraction");
    std::string documents_text = format_documents(corpus);
    std::size_t n = schema.items().size();
    std::vector<std::vector<ExtractedValue>> value_slots(n);
    std::vector<std::vector<std::string>> note_slots(n);

    parallel_for(n, workers, [&](std::size_t i) {
        const ChecklistItemDef& def = schema.items()[i];
        ModelRequest request;
        request.user = tpl.render({{"item_description", "identify " + format_item_definition(def)},
                                   {"case_documents", documents_text}});
        request.params = params;
        std::string label = "e2e:" + def.item_id;
        auto parsed =
            parse_with_retries(gateway, request, label, parse_retries, &note_slots[i]);
        if (!parsed) {
            note_slots[i].push_back("item left empty: reply never parsed");
            return;
        }
        value_slots[i] = keep_cited_values(std::move(parsed->extracted), &note_slots[i]);
    });

    ExtractionOutcome outcome;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = schema.items()[i].item_id;
        if (!value_slots[i].empty()) outcome.state.set(id, std::move(value_slots[i]));
        if (!note_slots[i].empty()) outcome.notes[id] = std::move(note_slots[i]);
    }
    return outcome;
}

std::string render_chunk_state(const std::vector<ExtractedValue>& values, std::size_t cap) {
    if (values.size() <= cap) return values_to_json(values).dump(2);
    std::vector<ExtractedValue> newest(values.end() - static_cast<std::ptrdiff_t>(cap),
                                       values.end());
    std::ostringstream out;
    out << "(showing the newest " << cap << " of " << values.size() << " values)\n"
        << values_to_json(newest).dump(2);
    return out.str();
}

ExtractionOutcome extract_chunk_by_chunk(ModelGateway& gateway, const PromptSet& prompts,
                                         const ChecklistSchema& schema, const CaseCorpus& corpus,
                                         std::size_t chunk_size, const ModelParams& params,
                                         int parse_retries, std::size_t workers) {
    if (chunk_size == 0) throw InvalidArgument("chunk_size must be positive");
    const PromptTemplate& tpl = prompts.get("chunk_extraction");
    std::size_t n = schema.items().size();
    std::vector<std::vector<ExtractedValue>> value_slots(n);
    std::vector<std::vector<std::string>> note_slots(n);

    parallel_for(n, workers, [&](std::size_t i) {
        const ChecklistItemDef& def = schema.items()[i];
        std::string label = "chunk:" + def.item_id;
        std::vector<ExtractedValue>& values = value_slots[i];
        std::vector<std::string>& notes = note_slots[i];
        for (const auto& doc : corpus.documents) {
            auto windows = chunk_document(doc, chunk_size);
            for (std::size_t w = 0; w < windows.size(); ++w) {
                std::ostringstream chunk_id;
                chunk_id << (w + 1);
                std::ostringstream total_chunks;
                total_chunks << windows.size();
                ModelRequest request;
                request.user = tpl.render(
                    {{"item_description", "identify " + format_item_definition(def)},
                     {"current_state", render_chunk_state(values)},
                     {"document_name", doc.name},
                     {"chunk_id", chunk_id.str()},
                     {"total_chunks", total_chunks.str()},
                     {"document_chunk", windows[w].text}});
                request.params = params;
                auto parsed = parse_with_retries(gateway, request, label, parse_retries, &notes);
                if (!parsed) {
                    std::ostringstream note;
                    note << doc.name << " chunk " << (w + 1) << "/" << windows.size()
                         << ": state carried forward, reply never parsed";
                    notes.push_back(note.str());
                    continue;
                }
                values = keep_cited_values(std::move(parsed->extracted), &notes);
            }
        }
    });

    ExtractionOutcome outcome;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = schema.items()[i].item_id;
        if (!value_slots[i].empty()) outcome.state.set(id, std::move(value_slots[i]));
        if (!note_slots[i].empty()) outcome.notes[id] = std::move(note_slots[i]);
    }
    return outcome;
}

} // namespace lexeval
