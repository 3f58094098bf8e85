// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lexeval/checklist.hpp"

namespace lexeval {

// Parsers for the structured blocks model replies are asked to produce.
// Each parser scans the reply for the first well-formed JSON block (fenced
// or bare) that satisfies its shape and fully validates it; a reply with no
// such block throws ParseError. None of them return partial values: a block
// either validates or the scan moves on.

/// First balanced JSON value in `text` satisfying `accept` (accept everything
/// when omitted). Candidate blocks are tried left to right; an unparseable
/// opening brace is skipped so nested blocks are still found.
std::optional<nlohmann::json> first_json_block(
    const std::string& text,
    const std::function<bool(const nlohmann::json&)>& accept = {});

/// Shape of the "evidence" entries in an extraction reply: bare strings when
/// extracting from a summary, {text, source_document, location} objects when
/// extracting from case documents.
enum class EvidenceShape { Strings, Objects };

struct ParsedExtraction {
    std::string reasoning;
    std::vector<ExtractedValue> extracted;
};

/// Parses {"reasoning", "extracted": [{"evidence": [...], "value": ...}]}.
ParsedExtraction parse_extraction(const std::string& reply, EvidenceShape shape);

enum class SingleRelation { Equal, AContainsB, BContainsA, Different };

/// Parses the four-way verdict after the reply's last "Final Answer" marker.
SingleRelation parse_single_compare(const std::string& reply);

struct MultiCompareResult {
    // 0-based, injective in both coordinates, in range.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t dropped_entries = 0; // out-of-range or double-booked pairs
};

/// Parses {"common": [{"A_index", "B_index"}], ...} with 1-based indices
/// against list sizes `a_size` and `b_size`. Invalid pair entries are dropped
/// and counted; the model's only_in_* lists are ignored (the complements are
/// recomputed downstream).
MultiCompareResult parse_multi_compare(const std::string& reply, std::size_t a_size,
                                       std::size_t b_size);

struct ResidualFact {
    std::string fact;
    std::vector<std::size_t> evidence_spans; // 0-based, validated
    bool operator==(const ResidualFact&) const = default;
};

struct ParsedResidualFacts {
    std::vector<ResidualFact> facts;
    std::size_t dropped_facts = 0; // cited an out-of-range or 0 span index
};

/// Parses {"extracted": [{"fact", "evidence_spans": [1-based]}]} against
/// `span_count` spans. Facts citing any out-of-range index are dropped and
/// counted, per the 1-based indexing the prompt mandates.
ParsedResidualFacts parse_residual_facts(const std::string& reply, std::size_t span_count);

inline constexpr std::array<std::string_view, 5> kStyleAspects = {
    "readability_jargon", "narrative_order", "sentence_structure",
    "formatting_layout", "citation_style"};

struct ParsedStyle {
    std::array<int, 5> scores{}; // in kStyleAspects order, each in [1,5]
    std::size_t adjusted = 0;    // values clamped into range or rounded
};

/// Parses the five-key style block; all five keys required, numeric values
/// rounded to integers and clamped to [1,5] with the adjustment counted.
ParsedStyle parse_style_scores(const std::string& reply);

struct AgentAction {
    bool is_stop = false;
    std::string tool;        // tool call only
    nlohmann::json args;     // tool call only, always an object
    std::string stop_reason; // stop only
};

/// Parses either a tool call {"name", "args"} or the stop decision
/// {"decision": "stop", "reason"}; the first block matching either shape wins.
AgentAction parse_agent_action(const std::string& reply);

} // namespace lexeval
