// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lexeval/tokenizer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lexeval {

struct CaseDocument {
    std::string name;
    std::string doc_type;
    int filing_order = 0;
    std::string text;
    std::size_t token_count = 0;
    std::vector<TokenSpan> token_spans; // offsets under the corpus tokenizer
};

/// Ordered case documents. Read-only after construction; safe to share
/// across threads.
struct CaseCorpus {
    std::string case_id;
    std::vector<CaseDocument> documents; // strictly ascending filing_order
    std::size_t total_tokens = 0;

    const CaseDocument* find(std::string_view name) const;
};

struct TokenWindow {
    std::string doc_name;
    std::size_t start_token = 0;
    std::size_t end_token = 0; // exclusive; end - start == token count of text
    std::string text;
};

CaseDocument make_document(const Tokenizer& tok, std::string name, std::string doc_type,
                           int filing_order, std::string text);

/// Validates name uniqueness and strict filing_order, sorts, sums totals.
CaseCorpus make_corpus(std::string case_id, std::vector<CaseDocument> documents);

// On-disk corpus: a directory holding manifest.json
//   {"case_id": ..., "documents": [{"name", "doc_type", "file", "filing_order"}, ...]}
// plus one UTF-8 text file per document.
CaseCorpus load_corpus(const Tokenizer& tok, const std::filesystem::path& dir);

// Token windows slice at token starts; token i owns the bytes from its first
// byte up to token i+1's first byte (token 0 additionally owns any leading
// whitespace, the last token owns the trailing rest). Concatenating a
// document's windows therefore reproduces its text byte-exactly.
std::size_t token_byte_begin(const CaseDocument& doc, std::size_t token_index);
std::string token_range_text(const CaseDocument& doc, std::size_t start_token,
                             std::size_t end_token);

/// Token index owning byte position `pos` (the last token starting at or
/// before pos; 0 for positions before the first token).
std::size_t token_index_at_byte(const CaseDocument& doc, std::size_t pos);

// Proportional truncation from the end of each document: each document keeps
// floor(token_count * limit / total) tokens from its start, then the
// remainder is handed out one token per document in filing order until the
// kept total equals the limit exactly. Under-limit corpora pass through
// unchanged; zero-length survivors stay in the catalog as empty entries.
CaseCorpus truncate_corpus(const Tokenizer& tok, const CaseCorpus& corpus, std::size_t limit);

/// Consecutive chunk_size-token windows covering the document; the last
/// window may be short. A zero-token document yields no windows.
std::vector<TokenWindow> chunk_document(const CaseDocument& doc, std::size_t chunk_size);

// Length-bin assignment: the target T minimizing |total - T| among targets
// whose +-20% interval [0.8T, 1.2T] contains total (ties -> smaller T).
std::optional<std::size_t> assign_length_bin(std::size_t total_tokens,
                                             const std::vector<std::size_t>& targets);
std::optional<std::size_t> assign_length_bin(const CaseCorpus& corpus,
                                             const std::vector<std::size_t>& targets);

} // namespace lexeval
