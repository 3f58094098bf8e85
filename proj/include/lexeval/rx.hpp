// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lexeval::rx {

// Byte-oriented regex engine with NFA simulation, so matching cost is
// O(text * pattern) with no backtracking blowup on any input. Dialect:
//   - literal bytes (non-ASCII bytes match themselves, so UTF-8 literals work)
//   - '.' any byte except newline
//   - escapes: \d \D \w \W \s \S \n \t \r, and backslash before any
//     punctuation byte matches that byte
//   - classes: [abc], [a-z0-9], [^...]; ']' literal when first, '-' literal
//     at the edges; class escapes allowed inside
//   - grouping (...), alternation |
//   - quantifiers * + ? {m} {m,} {m,n} (counted bounds capped at 1000)
//   - anchors ^ $ match at line boundaries
// Matching is case-sensitive. find scans for the leftmost match and returns
// the longest match at that start; find_all returns non-overlapping matches
// left to right, advancing one byte past an empty match.
struct Match {
    std::size_t begin = 0;
    std::size_t end = 0;
};

class Regex {
public:
    /// Compiles `pattern`; malformed syntax or an oversized expansion throws
    /// ParseError carrying a position-tagged message.
    static Regex compile(std::string_view pattern);

    std::optional<Match> find(std::string_view text, std::size_t from = 0) const;
    std::vector<Match> find_all(std::string_view text,
                                std::size_t limit = static_cast<std::size_t>(-1)) const;

    const std::string& pattern() const { return pattern_; }

private:
    Regex() = default;

    enum class Op : std::uint8_t { Class, Split, BeginLine, EndLine, Match };

    struct ByteSet {
        std::array<std::uint64_t, 4> bits{};
        void add(unsigned char c) { bits[c >> 6] |= std::uint64_t{1} << (c & 63); }
        bool test(unsigned char c) const {
            return (bits[c >> 6] >> (c & 63)) & 1;
        }
        void invert() {
            for (auto& w : bits) w = ~w;
        }
    };

    struct Inst {
        Op op = Op::Match;
        ByteSet cls;       // Class only
        std::size_t x = 0; // Split first branch / Jmp target
        std::size_t y = 0; // Split second branch
    };

    std::string pattern_;
    std::vector<Inst> prog_;
    std::size_t entry_ = 0;

    friend struct Compiler;
    friend struct Vm;
};

} // namespace lexeval::rx
