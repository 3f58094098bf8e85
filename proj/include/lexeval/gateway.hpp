// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexeval/backend.hpp"
#include "lexeval/checklist.hpp"
#include "lexeval/corpus.hpp"
#include "lexeval/prompt_template.hpp"
#include "lexeval/tokenizer.hpp"

namespace lexeval {

struct RetryPolicy {
    std::size_t max_attempts = 4;                    // 1 initial + 3 retries
    std::chrono::milliseconds initial_backoff{250};
    double backoff_multiplier = 2.0;
};

/// One completed model call, for audit and replay checks. Request and
/// response are stored as FNV-1a hashes; (label, seq) orders calls stably
/// even when workers interleave.
struct TranscriptEntry {
    std::string label;
    std::size_t seq = 0;
    std::string request_hash;
    std::string response_hash;
    ModelUsage usage;
};

// Front door for all model traffic: context-limit check, transport retries
// with exponential backoff, usage accounting, transcript capture. Safe for
// concurrent callers.
class ModelGateway {
public:
    ModelGateway(std::shared_ptr<Backend> backend, Tokenizer tokenizer,
                 RetryPolicy retry = {});

    /// Completes `request`, recording usage under `label`. Throws
    /// InvalidArgument (empty user), ContextOverflow (declared limit
    /// exceeded; nothing is sent), BackendUnavailable (retries exhausted).
    ModelResponse complete(const ModelRequest& request, const std::string& label);

    Backend& backend() { return *backend_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }
    UsageLedger& ledger() { return ledger_; }
    const UsageLedger& ledger() const { return ledger_; }

    /// Transcript sorted by (label, seq); independent of worker scheduling.
    std::vector<TranscriptEntry> transcript() const;
    nlohmann::json transcript_json() const;

    /// Test hook replacing real sleeps between retries.
    void set_sleep_hook(std::function<void(std::chrono::milliseconds)> hook);

private:
    std::shared_ptr<Backend> backend_;
    Tokenizer tokenizer_;
    RetryPolicy retry_;
    UsageLedger ledger_;
    mutable std::mutex transcript_mu_;
    std::vector<TranscriptEntry> transcript_;
    std::function<void(std::chrono::milliseconds)> sleep_hook_;
};

// Canonical text renderings shared by the prompt pipelines.
std::string format_item_definition(const ChecklistItemDef& def);
std::string format_all_definitions(const ChecklistSchema& schema);
std::string format_documents(const CaseCorpus& corpus);

/// Runs the summarization prompt over the whole corpus and returns the text
/// after the "**Case Summary:**" marker (the full reply if the marker is
/// missing). The corpus must already fit the backend's declared context.
std::string generate_summary(ModelGateway& gateway, const PromptSet& prompts,
                             const ChecklistSchema& schema, const CaseCorpus& corpus,
                             const ModelParams& params = {},
                             const std::string& label = "summarize");

} // namespace lexeval
