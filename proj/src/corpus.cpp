// SPDX-License-Identifier: Apache-2.0
#include "lexeval/corpus.hpp"

#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace lexeval {

const CaseDocument* CaseCorpus::find(std::string_view name) const {
    for (const CaseDocument& doc : documents) {
        if (doc.name == name) {
            return &doc;
        }
    }
    return nullptr;
}

CaseDocument make_document(const Tokenizer& tok, std::string name, std::string doc_type,
                           int filing_order, std::string text) {
    CaseDocument doc;
    doc.name = std::move(name);
    doc.doc_type = std::move(doc_type);
    doc.filing_order = filing_order;
    doc.text = std::move(text);
    doc.token_spans = tok.spans(doc.text);
    doc.token_count = doc.token_spans.size();
    if (doc.filing_order < 0) {
        throw InvalidArgument("filing_order must be >= 0 for document " + doc.name);
    }
    return doc;
}

CaseCorpus make_corpus(std::string case_id, std::vector<CaseDocument> documents) {
    std::stable_sort(documents.begin(), documents.end(),
                     [](const CaseDocument& a, const CaseDocument& b) {
                         return a.filing_order < b.filing_order;
                     });
    std::set<std::string> names;
    std::set<int> orders;
    std::size_t total = 0;
    for (const CaseDocument& doc : documents) {
        if (!names.insert(doc.name).second) {
            throw InvalidArgument("duplicate document name: " + doc.name);
        }
        if (!orders.insert(doc.filing_order).second) {
            throw InvalidArgument("duplicate filing_order " + std::to_string(doc.filing_order) +
                                  " on document " + doc.name);
        }
        total += doc.token_count;
    }
    CaseCorpus corpus;
    corpus.case_id = std::move(case_id);
    corpus.documents = std::move(documents);
    corpus.total_tokens = total;
    return corpus;
}

CaseCorpus load_corpus(const Tokenizer& tok, const std::filesystem::path& dir) {
    const std::filesystem::path manifest_path = dir / "manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("invalid manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("case_id") ||
        !manifest.contains("documents") || !manifest["documents"].is_array()) {
        throw InvalidArgument("manifest must hold case_id and a documents array: " +
                              manifest_path.string());
    }
    std::vector<CaseDocument> docs;
    for (const nlohmann::json& entry : manifest["documents"]) {
        for (const char* key : {"name", "doc_type", "file", "filing_order"}) {
            if (!entry.contains(key)) {
                throw InvalidArgument(std::string("manifest document entry missing '") + key +
                                      "' in " + manifest_path.string());
            }
        }
        std::string file = entry["file"].get<std::string>();
        docs.push_back(make_document(tok, entry["name"].get<std::string>(),
                                     entry["doc_type"].get<std::string>(),
                                     entry["filing_order"].get<int>(),
                                     read_file(dir / file)));
    }
    return make_corpus(manifest["case_id"].get<std::string>(), std::move(docs));
}

std::size_t token_byte_begin(const CaseDocument& doc, std::size_t token_index) {
    if (token_index == 0) {
        return 0;
    }
    if (token_index >= doc.token_count) {
        return doc.text.size();
    }
    return doc.token_spans[token_index].begin;
}

std::string token_range_text(const CaseDocument& doc, std::size_t start_token,
                             std::size_t end_token) {
    if (start_token > end_token || end_token > doc.token_count) {
        throw InvalidArgument("token range [" + std::to_string(start_token) + ", " +
                              std::to_string(end_token) + ") out of bounds for document " +
                              doc.name);
    }
    const std::size_t b = token_byte_begin(doc, start_token);
    const std::size_t e = token_byte_begin(doc, end_token);
    return doc.text.substr(b, e - b);
}

std::size_t token_index_at_byte(const CaseDocument& doc, std::size_t pos) {
    if (doc.token_count == 0) {
        return 0;
    }
    // last token whose begin <= pos
    auto it = std::upper_bound(doc.token_spans.begin(), doc.token_spans.end(), pos,
                               [](std::size_t p, const TokenSpan& s) { return p < s.begin; });
    if (it == doc.token_spans.begin()) {
        return 0;
    }
    return static_cast<std::size_t>(std::distance(doc.token_spans.begin(), it)) - 1;
}

CaseCorpus truncate_corpus(const Tokenizer& tok, const CaseCorpus& corpus, std::size_t limit) {
    if (limit == 0) {
        throw InvalidArgument("truncation limit must be > 0");
    }
    if (corpus.total_tokens <= limit) {
        return corpus;
    }
    const std::size_t total = corpus.total_tokens;
    std::vector<std::size_t> kept(corpus.documents.size());
    std::size_t kept_total = 0;
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        // 64-bit product: counts and limits stay far below 2^32
        kept[i] = static_cast<std::size_t>(
            (static_cast<unsigned long long>(corpus.documents[i].token_count) * limit) / total);
        kept_total += kept[i];
    }
    // hand out the remainder one token per document in filing order
    for (std::size_t i = 0; i < kept.size() && kept_total < limit; ++i) {
        if (kept[i] < corpus.documents[i].token_count) {
            ++kept[i];
            ++kept_total;
        }
    }
    std::vector<CaseDocument> docs;
    docs.reserve(corpus.documents.size());
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        const CaseDocument& doc = corpus.documents[i];
        docs.push_back(make_document(tok, doc.name, doc.doc_type, doc.filing_order,
                                     token_range_text(doc, 0, kept[i])));
    }
    return make_corpus(corpus.case_id, std::move(docs));
}

std::vector<TokenWindow> chunk_document(const CaseDocument& doc, std::size_t chunk_size) {
    if (chunk_size == 0) {
        throw InvalidArgument("chunk_size must be > 0");
    }
    std::vector<TokenWindow> windows;
    for (std::size_t start = 0; start < doc.token_count; start += chunk_size) {
        const std::size_t end = std::min(doc.token_count, start + chunk_size);
        windows.push_back({doc.name, start, end, token_range_text(doc, start, end)});
    }
    return windows;
}

std::optional<std::size_t> assign_length_bin(std::size_t total_tokens,
                                             const std::vector<std::size_t>& targets) {
    if (targets.empty()) {
        throw InvalidArgument("length-bin targets must be nonempty");
    }
    if (!std::is_sorted(targets.begin(), targets.end())) {
        throw InvalidArgument("length-bin targets must be sorted ascending");
    }
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t t : targets) {
        const double total = static_cast<double>(total_tokens);
        const double target = static_cast<double>(t);
        if (total < 0.8 * target || total > 1.2 * target) {
            continue;
        }
        const double dist = std::abs(total - target);
        if (!best || dist < best_dist) {
            best = t;
            best_dist = dist;
        }
    }
    return best;
}

std::optional<std::size_t> assign_length_bin(const CaseCorpus& corpus,
                                             const std::vector<std::size_t>& targets) {
    return assign_length_bin(corpus.total_tokens, targets);
}

} // namespace lexeval
