// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexeval/backend.hpp"
#include "lexeval/checklist.hpp"
#include "lexeval/corpus.hpp"
#include "lexeval/gateway.hpp"
#include "lexeval/prompt_template.hpp"

namespace lexeval {

// Per-call read cap: requests past this many tokens are clipped, never erred.
inline constexpr std::size_t kReadCapTokens = 10000;
// Snapshot history window: at most this many entries, the newest
// kFullResponseEntries of them carrying full tool responses.
inline constexpr std::size_t kHistoryWindow = 100;
inline constexpr std::size_t kFullResponseEntries = 5;
inline constexpr std::size_t kSearchContextMin = 100;
inline constexpr std::size_t kSearchContextMax = 1000;
inline constexpr std::size_t kDefaultChunkTokens = 16000;

enum class AgentMode { OneAgentAll, NineByGroup, TwentySixIndividual };

std::string to_string(AgentMode mode);
AgentMode agent_mode_from_string(std::string_view name); // throws ConfigError

struct AgentConfig {
    AgentMode mode = AgentMode::OneAgentAll;
    std::size_t step_budget = 120;     // tool calls per agent cell
    std::size_t search_top_k = 8;      // default when the call omits top_k
    std::size_t search_context_tokens = 200; // default context window
    ModelParams params;
};

// One executed tool call (or one malformed model turn, recorded under the
// pseudo-name "invalid_action" so that step indices stay dense).
struct ToolCall {
    std::string name;
    nlohmann::json args;
    nlohmann::json response; // full payload; {"error": ...} for tool errors
    std::string outcome_summary;
    std::size_t step_index = 0;
};

struct TokenRange {
    std::size_t begin = 0;
    std::size_t end = 0; // exclusive

    bool operator==(const TokenRange&) const = default;
};

// Append-only per-step record: enough to replay or audit a cell run.
struct AgentStepRecord {
    std::size_t step_index = 0;
    std::string snapshot_hash;
    nlohmann::json action; // parsed tool call / stop decision / format error
    std::string response_hash;
    ModelUsage usage;

    nlohmann::json to_json() const;
};

struct AgentTrace {
    std::string cell; // ledger label, e.g. "agent:all"
    std::vector<std::string> item_ids;
    std::vector<ToolCall> calls;
    // Per document: merged, sorted, disjoint viewed intervals. Only grows.
    std::map<std::string, std::vector<TokenRange>> viewed_ranges;
    ModelUsage usage;
    std::string terminal; // "stop" | "step-budget-exhausted" | "error"
    std::string stop_reason;
    std::string error_message;
    std::vector<AgentStepRecord> log;

    void record_view(const std::string& doc_name, std::size_t begin, std::size_t end);
    std::size_t covered_tokens(const std::string& doc_name) const;
    bool fully_visited(const CaseDocument& doc) const;

    nlohmann::json to_json() const;
    nlohmann::json log_json() const; // array of per-step records
};

// Tool payloads are plain JSON handed back to the agent. Failures come back
// as {"error": "<message>"} payloads, never as exceptions, so the agent can
// self-correct.
bool is_tool_error(const nlohmann::json& payload);

nlohmann::json tool_list_documents(const CaseCorpus& corpus);

// Returns tokens [start, min(end, start+kReadCapTokens, doc length)). The
// payload carries a "notice" when the window was clipped by the cap or the
// start lies at or past the end of the document.
nlohmann::json tool_read_document(const CaseCorpus& corpus, const std::string& doc_name,
                                  std::size_t start_token, std::size_t end_token,
                                  AgentTrace* trace = nullptr);

// Matches the pattern over raw document text, positions mapped to token
// indices. Results come in (filing order, position) order, truncated to
// top_k; each match carries a context window of about context_tokens tokens
// centered on the match and clipped at document bounds. doc_scope empty
// means every document.
nlohmann::json tool_search_document_regex(const CaseCorpus& corpus, const std::string& pattern,
                                          const std::vector<std::string>& doc_scope,
                                          std::size_t top_k, std::size_t context_tokens,
                                          AgentTrace* trace = nullptr);

// scope holds the item ids this agent cell may touch; anything else in the
// schema is reported as out of scope.
nlohmann::json tool_get_checklist(const ChecklistSchema& schema, const ChecklistState& state,
                                  const std::vector<std::string>& scope,
                                  const std::vector<std::string>& item_ids);

// changes: {"<item_id>": [{"value", "evidence": [...]}, ...]}. Both tools
// delegate to apply_patch; schema and protocol violations come back as
// tool-error payloads and leave the state untouched.
nlohmann::json tool_append_checklist(const ChecklistSchema& schema, ChecklistState& state,
                                     const std::vector<std::string>& scope,
                                     const nlohmann::json& changes);
nlohmann::json tool_update_checklist(const ChecklistSchema& schema, ChecklistState& state,
                                     const std::vector<std::string>& scope,
                                     const nlohmann::json& changes);

struct Snapshot {
    std::string system_text;
    std::string user_text;

    std::string hash() const;
};

// Agent system prompt with {{TOOL_DESCRIPTIONS}} expanded from the tool
// description data file.
std::string render_agent_system(const PromptSet& prompts);

// User-side snapshot: task, in-scope definitions, document catalog with
// visited status and viewed token ranges, checklist summary, and the history
// window (<= kHistoryWindow entries; the newest kFullResponseEntries carry
// full responses, older ones are compressed to one line).
Snapshot build_snapshot(const PromptSet& prompts, const ChecklistSchema& schema,
                        const std::vector<std::string>& item_ids, const CaseCorpus& corpus,
                        const ChecklistState& state, const AgentTrace& trace);

struct AgentRunResult {
    ChecklistState state;
    AgentTrace trace;
};

// One sequential tool loop over the given item subset: snapshot, one action
// per model turn (tool call or stop), execute, repeat until stop or the step
// budget runs out. Unparseable turns consume a step and feed a format-error
// payload back through the history. A backend outage ends the run with the
// partial state and terminal "error".
AgentRunResult run_agent(ModelGateway& gateway, const PromptSet& prompts,
                         const ChecklistSchema& schema, const std::vector<std::string>& item_ids,
                         const CaseCorpus& corpus, const AgentConfig& config,
                         const std::string& cell_label);

struct OrchestrationResult {
    ChecklistState state;
    std::vector<AgentTrace> traces; // one per cell, schema order
    // item_id -> error message for items whose cell ended with terminal
    // "error"; such items keep whatever partial values the cell extracted.
    std::map<std::string, std::string> item_errors;
    ModelUsage usage;
};

// One run_agent per partition cell (whole schema, the 9 groups, or 26
// singleton cells), each over a fresh state restricted to its items; cell
// states merge by their disjoint item keys.
OrchestrationResult orchestrate_agents(ModelGateway& gateway, const PromptSet& prompts,
                                       const ChecklistSchema& schema, const CaseCorpus& corpus,
                                       const AgentConfig& config);

struct ExtractionOutcome {
    ChecklistState state;
    // item_id -> notes (dropped values, parse failures). Items without
    // incidents carry no key.
    std::map<std::string, std::vector<std::string>> notes;
};

// Single-shot extraction: one prompt per checklist item over the whole
// concatenated corpus. Values without evidence or whose evidence does not
// name a source document are dropped and noted; a parse failure after the
// retry budget leaves the item empty and noted.
ExtractionOutcome extract_end_to_end(ModelGateway& gateway, const PromptSet& prompts,
                                     const ChecklistSchema& schema, const CaseCorpus& corpus,
                                     const ModelParams& params = {}, int parse_retries = 2,
                                     std::size_t workers = 1);

// Chunked extraction: per item, walk the documents in filing order in
// chunk_size-token windows; each call sees the serialized current state and
// its reply replaces that item's value list. A chunk whose reply fails to
// parse carries the state forward unchanged and is noted.
ExtractionOutcome extract_chunk_by_chunk(ModelGateway& gateway, const PromptSet& prompts,
                                         const ChecklistSchema& schema, const CaseCorpus& corpus,
                                         std::size_t chunk_size = kDefaultChunkTokens,
                                         const ModelParams& params = {}, int parse_retries = 2,
                                         std::size_t workers = 1);

// Chunk-prompt state serialization: the canonical value-list JSON, truncated
// to the newest `cap` values with a count notice when longer.
std::string render_chunk_state(const std::vector<ExtractedValue>& values, std::size_t cap = 50);

} // namespace lexeval
