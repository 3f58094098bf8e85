// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lexeval {

/// Byte span [begin, end) of one word (maximal non-whitespace run).
struct WordSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

bool is_ascii_space(unsigned char c);
bool is_ascii_punct(unsigned char c);

/// Maximal non-whitespace runs, in order. Whitespace = ASCII space/tab/CR/LF/FF/VT.
std::vector<WordSpan> split_words(std::string_view text);

/// Casefolds ASCII letters, collapses whitespace runs to a single space,
/// trims leading/trailing whitespace. The basis for all snippet matching.
std::string normalize_match_text(std::string_view text);

/// normalize_match_text plus stripping leading/trailing ASCII punctuation.
std::string normalize_needle(std::string_view text);

/// Lowercased word tokens of the normalized form (for fuzzy containment).
std::vector<std::string> normalized_word_tokens(std::string_view text);

std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// n-indexed parallel loop over a bounded worker pool. workers <= 1 runs
/// inline. The first exception thrown by any worker is rethrown after join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace lexeval
