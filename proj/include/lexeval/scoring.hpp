// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lexeval/checklist.hpp"
#include "lexeval/structured_parse.hpp"

namespace lexeval {

/// Outcome of comparing one checklist item (or the residual-fact lists)
/// between two summaries. Single items carry a four-way relation; multi items
/// carry the matched index pairs plus both list sizes.
struct ComparisonOutcome {
    std::string item_id;
    Cardinality kind = Cardinality::Single;
    SingleRelation relation = SingleRelation::Different; // single only
    std::vector<std::pair<std::size_t, std::size_t>> pairs; // multi only, 0-based
    std::size_t a_size = 0; // multi only
    std::size_t b_size = 0; // multi only
    bool abstained = false; // comparison unparseable after retries

    /// Indices of A (respectively B) not covered by any pair.
    std::vector<std::size_t> only_in_a() const;
    std::vector<std::size_t> only_in_b() const;
};

/// Swaps the roles of A and B: containment relations flip, pair coordinates
/// transpose, sizes swap.
ComparisonOutcome swap_sides(const ComparisonOutcome& outcome);

std::string_view to_string(SingleRelation relation);
SingleRelation relation_from_string(std::string_view name);

nlohmann::json outcome_to_json(const ComparisonOutcome& outcome);
ComparisonOutcome outcome_from_json(const nlohmann::json& j);

struct ItemScore {
    std::string item_id;
    bool applicable = false;
    std::optional<double> m; // present iff applicable
    bool overspecified = false;  // model filled, reference empty
    bool underspecified = false; // reference filled, model empty
    bool abstained = false;
};

/// Five 1-5 ratings in kStyleAspects order.
struct StyleRating {
    std::array<int, 5> scores{};
    bool abstained = false;
};

/// Eq.-style matching score for one compared item: single equal→1,
/// containment→0.5, different→0; multi → pair F1 = 2|pairs|/(|A|+|B|).
double matching_score(const ComparisonOutcome& outcome, Cardinality cardinality);

/// 100 × mean m over applicable items; zero applicable → UndefinedScore.
double checklist_score(const std::vector<ItemScore>& item_scores);

/// 100 × pair F1 of the residual-fact comparison; both lists empty → 0
/// (weightless downstream because r is 0 as well).
double residual_score(const ComparisonOutcome& outcome);

/// (mean rating − 1) × 25; ratings must be in [1,5].
double style_score(const StyleRating& rating);

/// Merged residual character length ÷ summary length, both in bytes.
/// `residual_spans` holds merged non-overlapping [begin, end) spans.
double residual_ratio(const std::vector<std::pair<std::size_t, std::size_t>>& residual_spans,
                      const std::string& summary);

/// alpha·[(1−r)·s_checklist + r·s_residual] + (1−alpha)·s_style.
double overall_score(double s_checklist, double s_residual, double s_style, double r,
                     double alpha);

struct ScoreReport {
    double s_checklist = 0;
    double s_residual = 0;
    double s_style = 0;
    double s_overall = 0;
    double r = 0;
    double alpha = 0;
    std::vector<ItemScore> item_scores;

    nlohmann::json to_json() const;
};

struct SpecificationRates {
    double overspec_rate = 0;                 // over all cases
    std::optional<double> underspec_rate;     // over reference-filled cases; absent if none
};

/// Per-item over/under-specification frequencies across a case set.
std::map<std::string, SpecificationRates> specification_rates(
    const std::vector<std::vector<ItemScore>>& cases);

/// Agreement between two aligned 4-way label sequences.
double single_accuracy(const std::vector<SingleRelation>& a,
                       const std::vector<SingleRelation>& b);

/// Micro-pooled F1 between aligned pair-set sequences: 2·Σ|H∩M| / (Σ|H|+Σ|M|).
double pairs_f1(const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& human,
                const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& model);

/// Fraction of words labeled identically (covered/residual) across aligned
/// word-label sequences.
double coverage_agreement(const std::vector<std::vector<bool>>& human,
                          const std::vector<std::vector<bool>>& model);

/// Unweighted Cohen's kappa over two aligned label sequences. Degenerate
/// chance agreement (p_e = 1) maps to 1 when observed agreement is perfect,
/// else 0.
double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b);

struct AgreementReport {
    double single_accuracy = 0;
    double pairs_f1 = 0;
    double coverage_agreement = 0;
    double style_kappa = 0;                       // pooled across all five aspects
    std::array<double, 5> per_aspect_kappa{};     // kStyleAspects order

    nlohmann::json to_json() const;
};

/// All meta-evaluation agreement metrics between aligned human and model
/// artifacts. Ratings are per-pair five-aspect vectors.
AgreementReport agreement_metrics(
    const std::vector<SingleRelation>& human_relations,
    const std::vector<SingleRelation>& model_relations,
    const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& human_pairs,
    const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& model_pairs,
    const std::vector<std::vector<bool>>& human_coverage,
    const std::vector<std::vector<bool>>& model_coverage,
    const std::vector<StyleRating>& human_ratings,
    const std::vector<StyleRating>& model_ratings);

} // namespace lexeval
