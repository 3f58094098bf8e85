// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lexeval {

/// Byte span [begin, end) of one token within its source text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Deterministic rule-based segmenter, id "rule_based_v1". It exists so every
// token offset inside one run is self-consistent without an external
// tokenizer. Rules:
//   - whitespace (ASCII space/tab/CR/LF/FF/VT) separates tokens and is never
//     part of one;
//   - a single ASCII punctuation byte is one token;
//   - any other maximal byte run is one token (letters, digits, and all
//     non-ASCII UTF-8 bytes glue together).
// So "Filed: January 5, 2025" segments as [Filed][:][January][5][,][2025].
//
// Tokenizer ids are recorded in run configs; loading with an unknown id is
// rejected so offsets from different tokenizers are never mixed.
class Tokenizer {
public:
    explicit Tokenizer(std::string id = "rule_based_v1");

    const std::string& id() const { return id_; }

    std::size_t count(std::string_view text) const;
    std::vector<TokenSpan> spans(std::string_view text) const;

private:
    std::string id_;
};

} // namespace lexeval
