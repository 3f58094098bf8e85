// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lexeval/checklist.hpp"
#include "lexeval/gateway.hpp"
#include "lexeval/scoring.hpp"
#include "lexeval/structured_parse.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

/// Checklist content pulled out of one summary. Every evidence snippet is
/// expected to be a verbatim substring of summary_text after normalization;
/// snippets that are not are flagged in diagnostics, not dropped.
struct SummaryExtraction {
    std::string summary_text;
    ChecklistState state;
};

/// Word-level covered/residual labeling of a summary, with merged character
/// spans for both label classes. Residual spans are maximal runs of residual
/// words, including the whitespace inside the run.
struct CoverageMap {
    std::vector<WordSpan> words;
    std::vector<bool> covered; // aligned with words
    std::vector<std::pair<std::size_t, std::size_t>> covered_spans;
    std::vector<std::pair<std::size_t, std::size_t>> residual_spans;
    std::vector<std::string> residual_span_texts;

    nlohmann::json to_json() const;
};

struct EvalConfig {
    int parse_retries = 2; // re-prompts after an unparseable reply
    int workers = 1;       // concurrent checklist items inside evaluate_pair
    ModelParams params;
    std::string style_rubric; // aspect definitions rendered into the style prompt
};

/// Everything evaluate_pair learned, before any scoring. Serializable and
/// byte-reproducible for a fixed backend script.
struct RawEvaluation {
    SummaryExtraction model_extraction;
    SummaryExtraction reference_extraction;
    std::vector<ComparisonOutcome> outcomes; // applicable items, schema order
    CoverageMap model_coverage;
    CoverageMap reference_coverage;
    std::vector<ResidualFact> model_facts;
    std::vector<ResidualFact> reference_facts;
    ComparisonOutcome residual_outcome; // model facts vs reference facts
    StyleRating style;
    nlohmann::json diagnostics; // op/item -> list of notes

    nlohmann::json to_json(const ChecklistSchema& schema) const;
};

/// Values with the Not-Applicable sentinel entries removed: the content that
/// counts for comparison and applicability.
std::vector<ExtractedValue> strip_not_applicable(const std::vector<ExtractedValue>& values);

// The reference-based evaluation pipeline over one (model summary, reference
// summary) pair. Model traffic goes through the gateway; each public step is
// also callable on its own.
class RefEvaluator {
public:
    RefEvaluator(ModelGateway& gateway, const PromptSet& prompts,
                 const ChecklistSchema& schema, EvalConfig config = {});

    /// One item out of one summary. Values without evidence are dropped as
    /// protocol violations; an unparseable reply after retries yields an
    /// empty list. `notes` (optional everywhere) collects diagnostics.
    std::vector<ExtractedValue> extract_item_from_summary(
        const std::string& summary, const ChecklistItemDef& item, const std::string& label,
        std::vector<std::string>* notes = nullptr);

    /// Four-way or list-wise comparison after stripping Not-Applicable
    /// entries. Empty-vs-nonempty and identical inputs resolve without a
    /// model call; an unparseable verdict degrades to different / zero pairs
    /// with the abstained flag set.
    ComparisonOutcome compare_item(const ChecklistItemDef& item,
                                   const std::vector<ExtractedValue>& a,
                                   const std::vector<ExtractedValue>& b,
                                   const std::string& label = std::string(),
                                   std::vector<std::string>* notes = nullptr);

    /// Two-stage pure-text coverage: extracted values first, evidence
    /// snippets for whatever remains uncovered.
    CoverageMap build_coverage_map(const std::string& summary,
                                   const SummaryExtraction& extraction) const;

    /// Atomic facts from residual spans; facts citing out-of-range span
    /// indices are dropped and noted. No spans, no model call.
    std::vector<ResidualFact> extract_residual_facts(const std::vector<std::string>& spans,
                                                     const std::string& label,
                                                     std::vector<std::string>* notes = nullptr);

    /// List-wise comparison of the two fact lists (same contract as a
    /// multi-value compare_item, except that two empty lists are a valid
    /// zero-pair outcome rather than an error).
    ComparisonOutcome compare_residual_facts(const std::vector<ResidualFact>& model_facts,
                                             const std::vector<ResidualFact>& reference_facts,
                                             const std::string& label = std::string(),
                                             std::vector<std::string>* notes = nullptr);

    /// Five-aspect style similarity; out-of-range ratings are clamped, an
    /// unparseable reply degrades to all 1s with the abstained flag.
    StyleRating rate_style(const std::string& summary_a, const std::string& summary_b,
                           std::vector<std::string>* notes = nullptr);

    /// The full pipeline. Items run under config.workers; the result is
    /// independent of the worker count for a content-keyed backend script.
    RawEvaluation evaluate_pair(const std::string& model_summary,
                                const std::string& reference_summary);

private:
    ModelRequest make_request(std::string user) const;
    ComparisonOutcome compare_string_lists(const std::string& category,
                                           const std::string& item_id,
                                           const std::vector<std::string>& a,
                                           const std::vector<std::string>& b,
                                           const std::string& label,
                                           std::vector<std::string>* notes);

    ModelGateway& gateway_;
    const PromptSet& prompts_;
    const ChecklistSchema& schema_;
    EvalConfig config_;
};

/// ScoreReport from a finished RawEvaluation: per-item matching scores over
/// applicable items, S_checklist / S_residual / S_style, the reference-side
/// residual ratio, and the combined overall score.
ScoreReport score_evaluation(const RawEvaluation& raw, const ChecklistSchema& schema,
                             double alpha);

} // namespace lexeval
