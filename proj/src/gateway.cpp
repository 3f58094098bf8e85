// SPDX-License-Identifier: Apache-2.0
#include "lexeval/gateway.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

ModelGateway::ModelGateway(std::shared_ptr<Backend> backend, Tokenizer tokenizer,
                           RetryPolicy retry)
    : backend_(std::move(backend)), tokenizer_(std::move(tokenizer)), retry_(retry) {
    if (!backend_) throw InvalidArgument("gateway needs a backend");
    if (retry_.max_attempts == 0) throw InvalidArgument("retry policy needs at least 1 attempt");
}

void ModelGateway::set_sleep_hook(std::function<void(std::chrono::milliseconds)> hook) {
    sleep_hook_ = std::move(hook);
}

ModelResponse ModelGateway::complete(const ModelRequest& request, const std::string& label) {
    if (request.user.empty())
        throw InvalidArgument("model request has an empty user message");

    if (std::size_t limit = backend_->context_limit_tokens(); limit > 0) {
        std::size_t input = tokenizer_.count(request.system) + tokenizer_.count(request.user);
        if (input > limit) {
            std::ostringstream os;
            os << "request of " << input << " tokens exceeds backend context limit of "
               << limit;
            throw ContextOverflow(os.str());
        }
    }

    ModelResponse response;
    std::string last_error;
    auto backoff = retry_.initial_backoff;
    bool ok = false;
    for (std::size_t attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        try {
            response = backend_->complete_once(request);
            ok = true;
            break;
        } catch (const TransportError& e) {
            last_error = e.what();
            if (attempt == retry_.max_attempts) break;
            if (sleep_hook_)
                sleep_hook_(backoff);
            else
                std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(static_cast<long long>(
                static_cast<double>(backoff.count()) * retry_.backoff_multiplier));
        }
    }
    if (!ok)
        throw BackendUnavailable("backend '" + backend_->name() + "' failed after " +
                                 std::to_string(retry_.max_attempts) +
                                 " attempts: " + last_error);

    std::size_t seq = ledger_.add(label, response.usage);
    TranscriptEntry entry;
    entry.label = label;
    entry.seq = seq;
    entry.request_hash = fnv1a64_hex(request.system + "\x1f" + request.user);
    entry.response_hash = fnv1a64_hex(response.text);
    entry.usage = response.usage;
    {
        std::lock_guard<std::mutex> lock(transcript_mu_);
        transcript_.push_back(std::move(entry));
    }
    return response;
}

std::vector<TranscriptEntry> ModelGateway::transcript() const {
    std::vector<TranscriptEntry> copy;
    {
        std::lock_guard<std::mutex> lock(transcript_mu_);
        copy = transcript_;
    }
    std::sort(copy.begin(), copy.end(), [](const TranscriptEntry& a, const TranscriptEntry& b) {
        if (a.label != b.label) return a.label < b.label;
        return a.seq < b.seq;
    });
    return copy;
}

nlohmann::json ModelGateway::transcript_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : transcript()) {
        out.push_back({{"label", e.label},
                       {"seq", e.seq},
                       {"request_hash", e.request_hash},
                       {"response_hash", e.response_hash},
                       {"input_tokens", e.usage.input_tokens},
                       {"output_tokens", e.usage.output_tokens}});
    }
    return out;
}

std::string format_item_definition(const ChecklistItemDef& def) {
    return def.display_name + ": " + def.description;
}

std::string format_all_definitions(const ChecklistSchema& schema) {
    std::ostringstream os;
    std::size_t number = 1;
    for (const auto& [group, item_ids] : schema.group_partition()) {
        os << group << "\n";
        for (const auto& id : item_ids) {
            const auto& def = schema.item(id);
            os << number++ << ". " << format_item_definition(def) << "\n";
        }
        os << "\n";
    }
    auto text = os.str();
    while (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

std::string format_documents(const CaseCorpus& corpus) {
    std::ostringstream os;
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        const auto& doc = corpus.documents[i];
        if (i) os << "\n\n";
        os << "=== Document " << i + 1 << ": " << doc.name << " (type: " << doc.doc_type
           << ") ===\n"
           << doc.text;
    }
    return os.str();
}

std::string generate_summary(ModelGateway& gateway, const PromptSet& prompts,
                             const ChecklistSchema& schema, const CaseCorpus& corpus,
                             const ModelParams& params, const std::string& label) {
    if (corpus.documents.empty() || corpus.total_tokens == 0)
        throw InvalidArgument("cannot summarize an empty corpus");

    ModelRequest request;
    request.params = params;
    request.user =
        prompts.get("summarization")
            .render({{"all_26_checklist_item_definitions", format_all_definitions(schema)},
                     {"case_documents", format_documents(corpus)}});
    auto response = gateway.complete(request, label);

    static constexpr std::string_view kMarker = "**Case Summary:**";
    auto pos = response.text.find(kMarker);
    if (pos == std::string::npos) return response.text;
    std::string summary = response.text.substr(pos + kMarker.size());
    std::size_t start = summary.find_first_not_of(" \t\r\n");
    return start == std::string::npos ? std::string() : summary.substr(start);
}

} // namespace lexeval
