// SPDX-License-Identifier: Apache-2.0
#include "lexeval/scoring.hpp"

#include <algorithm>
#include <set>

#include "lexeval/errors.hpp"

namespace lexeval {

namespace {

std::vector<std::size_t> complement(
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, std::size_t size,
    bool first_coordinate) {
    std::vector<bool> used(size, false);
    for (const auto& [a, b] : pairs) {
        std::size_t i = first_coordinate ? a : b;
        if (i < size) used[i] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size; ++i)
        if (!used[i]) out.push_back(i);
    return out;
}

void check_component_range(double value, const char* what) {
    if (!(value >= 0.0 && value <= 100.0))
        throw InvalidArgument(std::string(what) + " must be in [0, 100]");
}

} // namespace

std::vector<std::size_t> ComparisonOutcome::only_in_a() const {
    return complement(pairs, a_size, true);
}

std::vector<std::size_t> ComparisonOutcome::only_in_b() const {
    return complement(pairs, b_size, false);
}

ComparisonOutcome swap_sides(const ComparisonOutcome& outcome) {
    ComparisonOutcome swapped = outcome;
    if (outcome.kind == Cardinality::Single) {
        if (outcome.relation == SingleRelation::AContainsB)
            swapped.relation = SingleRelation::BContainsA;
        else if (outcome.relation == SingleRelation::BContainsA)
            swapped.relation = SingleRelation::AContainsB;
    } else {
        for (auto& [a, b] : swapped.pairs) std::swap(a, b);
        std::swap(swapped.a_size, swapped.b_size);
    }
    return swapped;
}

std::string_view to_string(SingleRelation relation) {
    switch (relation) {
        case SingleRelation::Equal: return "equal";
        case SingleRelation::AContainsB: return "a_contains_b";
        case SingleRelation::BContainsA: return "b_contains_a";
        case SingleRelation::Different: return "different";
    }
    return "different";
}

SingleRelation relation_from_string(std::string_view name) {
    if (name == "equal") return SingleRelation::Equal;
    if (name == "a_contains_b") return SingleRelation::AContainsB;
    if (name == "b_contains_a") return SingleRelation::BContainsA;
    if (name == "different") return SingleRelation::Different;
    throw ParseError("unknown relation name '" + std::string(name) + "'");
}

nlohmann::json outcome_to_json(const ComparisonOutcome& outcome) {
    nlohmann::json j{{"item_id", outcome.item_id}, {"abstained", outcome.abstained}};
    if (outcome.kind == Cardinality::Single) {
        j["kind"] = "single";
        j["relation"] = to_string(outcome.relation);
    } else {
        j["kind"] = "multi";
        j["a_size"] = outcome.a_size;
        j["b_size"] = outcome.b_size;
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [a, b] : outcome.pairs) pairs.push_back({a, b});
        j["pairs"] = std::move(pairs);
        nlohmann::json only_a(outcome.only_in_a()), only_b(outcome.only_in_b());
        j["only_in_a"] = std::move(only_a);
        j["only_in_b"] = std::move(only_b);
    }
    return j;
}

ComparisonOutcome outcome_from_json(const nlohmann::json& j) {
    ComparisonOutcome outcome;
    outcome.item_id = j.at("item_id").get<std::string>();
    outcome.abstained = j.value("abstained", false);
    if (j.at("kind") == "single") {
        outcome.kind = Cardinality::Single;
        outcome.relation = relation_from_string(j.at("relation").get<std::string>());
    } else if (j.at("kind") == "multi") {
        outcome.kind = Cardinality::Multi;
        outcome.a_size = j.at("a_size").get<std::size_t>();
        outcome.b_size = j.at("b_size").get<std::size_t>();
        for (const auto& p : j.at("pairs"))
            outcome.pairs.emplace_back(p.at(0).get<std::size_t>(),
                                       p.at(1).get<std::size_t>());
    } else {
        throw ParseError("unknown comparison kind");
    }
    return outcome;
}

double matching_score(const ComparisonOutcome& outcome, Cardinality cardinality) {
    if (outcome.kind != cardinality)
        throw InvalidArgument("comparison outcome kind does not match item cardinality");
    if (cardinality == Cardinality::Single) {
        switch (outcome.relation) {
            case SingleRelation::Equal: return 1.0;
            case SingleRelation::AContainsB:
            case SingleRelation::BContainsA: return 0.5;
            case SingleRelation::Different: return 0.0;
        }
        throw InvalidArgument("unknown single-value relation");
    }
    std::size_t denom = outcome.a_size + outcome.b_size;
    if (denom == 0)
        throw InvalidArgument("matching score of two empty lists is undefined");
    return 2.0 * static_cast<double>(outcome.pairs.size()) / static_cast<double>(denom);
}

double checklist_score(const std::vector<ItemScore>& item_scores) {
    double sum = 0;
    std::size_t applicable = 0;
    for (const auto& item : item_scores) {
        if (!item.applicable) continue;
        if (!item.m)
            throw InvalidArgument("applicable item '" + item.item_id + "' has no score");
        sum += *item.m;
        ++applicable;
    }
    if (applicable == 0)
        throw UndefinedScore("no applicable checklist items; checklist score is undefined");
    return 100.0 * sum / static_cast<double>(applicable);
}

double residual_score(const ComparisonOutcome& outcome) {
    if (outcome.kind != Cardinality::Multi)
        throw InvalidArgument("residual comparison must be list-wise");
    if (outcome.a_size + outcome.b_size == 0) return 0.0;
    return 100.0 * matching_score(outcome, Cardinality::Multi);
}

double style_score(const StyleRating& rating) {
    double sum = 0;
    for (int score : rating.scores) {
        if (score < 1 || score > 5)
            throw InvalidArgument("style ratings must be in [1, 5]");
        sum += score;
    }
    return (sum / 5.0 - 1.0) * 25.0;
}

double residual_ratio(const std::vector<std::pair<std::size_t, std::size_t>>& residual_spans,
                      const std::string& summary) {
    if (summary.empty()) throw InvalidArgument("residual ratio of an empty summary");
    std::size_t residual = 0;
    for (const auto& [begin, end] : residual_spans) {
        if (begin > end || end > summary.size())
            throw InvalidArgument("residual span out of summary bounds");
        residual += end - begin;
    }
    return static_cast<double>(residual) / static_cast<double>(summary.size());
}

double overall_score(double s_checklist, double s_residual, double s_style, double r,
                     double alpha) {
    check_component_range(s_checklist, "checklist score");
    check_component_range(s_residual, "residual score");
    check_component_range(s_style, "style score");
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("residual ratio must be in [0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");
    return alpha * ((1.0 - r) * s_checklist + r * s_residual) + (1.0 - alpha) * s_style;
}

nlohmann::json ScoreReport::to_json() const {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : item_scores) {
        nlohmann::json j{{"item_id", item.item_id},
                         {"applicable", item.applicable},
                         {"overspecified", item.overspecified},
                         {"underspecified", item.underspecified},
                         {"abstained", item.abstained}};
        if (item.m) j["m"] = *item.m;
        items.push_back(std::move(j));
    }
    return nlohmann::json{{"s_checklist", s_checklist}, {"s_residual", s_residual},
                          {"s_style", s_style},         {"s_overall", s_overall},
                          {"r", r},                     {"alpha", alpha},
                          {"item_scores", std::move(items)}};
}

std::map<std::string, SpecificationRates> specification_rates(
    const std::vector<std::vector<ItemScore>>& cases) {
    if (cases.empty()) throw InvalidArgument("specification rates need at least one case");
    struct Counts {
        std::size_t overspec = 0;
        std::size_t reference_filled = 0;
        std::size_t underspec = 0;
    };
    std::map<std::string, Counts> counts;
    for (const auto& case_items : cases) {
        for (const auto& item : case_items) {
            auto& c = counts[item.item_id];
            if (item.overspecified) ++c.overspec;
            // Reference filled ⟺ applicable and not filled by the model alone.
            if (item.applicable && !item.overspecified) {
                ++c.reference_filled;
                if (item.underspecified) ++c.underspec;
            }
        }
    }
    std::map<std::string, SpecificationRates> rates;
    for (const auto& [item_id, c] : counts) {
        SpecificationRates r;
        r.overspec_rate = static_cast<double>(c.overspec) / static_cast<double>(cases.size());
        if (c.reference_filled > 0)
            r.underspec_rate =
                static_cast<double>(c.underspec) / static_cast<double>(c.reference_filled);
        rates[item_id] = r;
    }
    return rates;
}

double single_accuracy(const std::vector<SingleRelation>& a,
                       const std::vector<SingleRelation>& b) {
    if (a.size() != b.size() || a.empty())
        throw InvalidArgument("accuracy needs two aligned nonempty label sequences");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == b[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(a.size());
}

double pairs_f1(const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& human,
                const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& model) {
    if (human.size() != model.size())
        throw InvalidArgument("pair-set sequences are misaligned");
    std::size_t intersection = 0, total = 0;
    for (std::size_t i = 0; i < human.size(); ++i) {
        std::set<std::pair<std::size_t, std::size_t>> h(human[i].begin(), human[i].end());
        std::set<std::pair<std::size_t, std::size_t>> m(model[i].begin(), model[i].end());
        for (const auto& p : h)
            if (m.count(p)) ++intersection;
        total += h.size() + m.size();
    }
    if (total == 0) return 1.0; // no pairs anywhere: vacuous agreement
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(total);
}

double coverage_agreement(const std::vector<std::vector<bool>>& human,
                          const std::vector<std::vector<bool>>& model) {
    if (human.size() != model.size())
        throw InvalidArgument("coverage sequences are misaligned");
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < human.size(); ++i) {
        if (human[i].size() != model[i].size())
            throw InvalidArgument("coverage labelings differ in word count");
        for (std::size_t w = 0; w < human[i].size(); ++w)
            if (human[i][w] == model[i][w]) ++hits;
        total += human[i].size();
    }
    if (total == 0) throw InvalidArgument("coverage agreement needs at least one word");
    return static_cast<double>(hits) / static_cast<double>(total);
}

double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size() || a.empty())
        throw InvalidArgument("kappa needs two aligned nonempty label sequences");
    double n = static_cast<double>(a.size());
    std::map<int, std::size_t> count_a, count_b;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++count_a[a[i]];
        ++count_b[b[i]];
        if (a[i] == b[i]) ++agree;
    }
    double p_o = static_cast<double>(agree) / n;
    double p_e = 0;
    for (const auto& [label, ca] : count_a) {
        auto it = count_b.find(label);
        if (it != count_b.end())
            p_e += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
    }
    if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
    return (p_o - p_e) / (1.0 - p_e);
}

nlohmann::json AgreementReport::to_json() const {
    nlohmann::json per_aspect;
    for (std::size_t i = 0; i < kStyleAspects.size(); ++i)
        per_aspect[std::string(kStyleAspects[i])] = per_aspect_kappa[i];
    return nlohmann::json{{"single_accuracy", single_accuracy},
                          {"pairs_f1", pairs_f1},
                          {"coverage_agreement", coverage_agreement},
                          {"style_kappa", style_kappa},
                          {"per_aspect_kappa", std::move(per_aspect)}};
}

AgreementReport agreement_metrics(
    const std::vector<SingleRelation>& human_relations,
    const std::vector<SingleRelation>& model_relations,
    const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& human_pairs,
    const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& model_pairs,
    const std::vector<std::vector<bool>>& human_coverage,
    const std::vector<std::vector<bool>>& model_coverage,
    const std::vector<StyleRating>& human_ratings,
    const std::vector<StyleRating>& model_ratings) {
    if (human_ratings.size() != model_ratings.size() || human_ratings.empty())
        throw InvalidArgument("style ratings are misaligned");

    AgreementReport report;
    report.single_accuracy = single_accuracy(human_relations, model_relations);
    report.pairs_f1 = pairs_f1(human_pairs, model_pairs);
    report.coverage_agreement = coverage_agreement(human_coverage, model_coverage);

    std::vector<int> pooled_h, pooled_m;
    for (std::size_t aspect = 0; aspect < kStyleAspects.size(); ++aspect) {
        std::vector<int> h, m;
        for (std::size_t i = 0; i < human_ratings.size(); ++i) {
            h.push_back(human_ratings[i].scores[aspect]);
            m.push_back(model_ratings[i].scores[aspect]);
        }
        report.per_aspect_kappa[aspect] = cohens_kappa(h, m);
        pooled_h.insert(pooled_h.end(), h.begin(), h.end());
        pooled_m.insert(pooled_m.end(), m.begin(), m.end());
    }
    report.style_kappa = cohens_kappa(pooled_h, pooled_m);
    return report;
}

} // namespace lexeval
