// SPDX-License-Identifier: Apache-2.0
#include "lexeval/tokenizer.hpp"

#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

Tokenizer::Tokenizer(std::string id) : id_(std::move(id)) {
    if (id_ != "rule_based_v1") {
        throw ConfigError("unknown tokenizer id: " + id_);
    }
}

std::vector<TokenSpan> Tokenizer::spans(std::string_view text) const {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_ascii_space(c)) {
            ++i;
            continue;
        }
        if (is_ascii_punct(c)) {
            out.push_back({i, i + 1});
            ++i;
            continue;
        }
        std::size_t begin = i;
        while (i < n) {
            unsigned char d = static_cast<unsigned char>(text[i]);
            if (is_ascii_space(d) || is_ascii_punct(d)) {
                break;
            }
            ++i;
        }
        out.push_back({begin, i});
    }
    return out;
}

std::size_t Tokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    std::size_t i = 0;
    const std::size_t size = text.size();
    while (i < size) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_ascii_space(c)) {
            ++i;
            continue;
        }
        if (is_ascii_punct(c)) {
            ++n;
            ++i;
            continue;
        }
        while (i < size) {
            unsigned char d = static_cast<unsigned char>(text[i]);
            if (is_ascii_space(d) || is_ascii_punct(d)) {
                break;
            }
            ++i;
        }
        ++n;
    }
    return n;
}

} // namespace lexeval
