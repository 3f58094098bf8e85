// SPDX-License-Identifier: Apache-2.0
#include "lexeval/ref_eval.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "lexeval/errors.hpp"

namespace lexeval {

namespace {

bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](char c) { return is_ascii_space(static_cast<unsigned char>(c)); });
}

void add_note(std::vector<std::string>* notes, std::string note) {
    if (notes) notes->push_back(std::move(note));
}

std::string join_values(const std::vector<ExtractedValue>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += "; ";
        out += values[i].value;
    }
    return out;
}

std::string numbered_list(const std::vector<std::string>& entries) {
    std::ostringstream os;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i) os << "\n";
        os << i + 1 << ". " << entries[i];
    }
    return os.str();
}

std::vector<std::string> value_strings(const std::vector<ExtractedValue>& values) {
    std::vector<std::string> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(v.value);
    return out;
}

// Single normalized token of one word (no internal whitespace possible);
// empty for punctuation-only words.
std::string word_token(std::string_view word) {
    auto tokens = normalized_word_tokens(word);
    return tokens.empty() ? std::string() : std::move(tokens.front());
}

// Word positions carrying a nonempty normalized token, with those tokens.
struct TokenIndex {
    std::vector<std::size_t> word_index;
    std::vector<std::string> tokens;
};

// Marks every exact token-window match of `needle`; when none exists, every
// window with >= 0.8 multiset containment of the needle's tokens.
void mark_needle(const TokenIndex& ti, const std::vector<std::string>& needle,
                 std::vector<bool>& covered) {
    const std::size_t n = ti.tokens.size();
    const std::size_t m = needle.size();
    if (m == 0 || n == 0) return;

    bool exact = false;
    if (n >= m) {
        for (std::size_t start = 0; start + m <= n; ++start) {
            if (std::equal(needle.begin(), needle.end(), ti.tokens.begin() + start)) {
                exact = true;
                for (std::size_t k = start; k < start + m; ++k)
                    covered[ti.word_index[k]] = true;
            }
        }
    }
    if (exact) return;

    const std::size_t w = std::min(n, m);
    const double threshold = 0.8 * static_cast<double>(m);
    for (std::size_t start = 0; start + w <= n; ++start) {
        std::map<std::string_view, std::size_t> window;
        for (std::size_t k = start; k < start + w; ++k) ++window[ti.tokens[k]];
        std::size_t hits = 0;
        for (const auto& tok : needle) {
            auto it = window.find(tok);
            if (it != window.end() && it->second > 0) {
                --it->second;
                ++hits;
            }
        }
        if (static_cast<double>(hits) + 1e-12 >= threshold) {
            for (std::size_t k = start; k < start + w; ++k)
                covered[ti.word_index[k]] = true;
        }
    }
}

} // namespace

std::vector<ExtractedValue> strip_not_applicable(const std::vector<ExtractedValue>& values) {
    std::vector<ExtractedValue> out;
    for (const auto& v : values)
        if (v.value != kNotApplicable) out.push_back(v);
    return out;
}

nlohmann::json CoverageMap::to_json() const {
    auto spans = [](const std::vector<std::pair<std::size_t, std::size_t>>& ss) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& [b, e] : ss) j.push_back({b, e});
        return j;
    };
    nlohmann::json word_spans = nlohmann::json::array();
    for (const auto& w : words) word_spans.push_back({w.begin, w.end});
    return nlohmann::json{{"words", std::move(word_spans)},
                          {"covered", covered},
                          {"covered_spans", spans(covered_spans)},
                          {"residual_spans", spans(residual_spans)},
                          {"residual_span_texts", residual_span_texts}};
}

RefEvaluator::RefEvaluator(ModelGateway& gateway, const PromptSet& prompts,
                           const ChecklistSchema& schema, EvalConfig config)
    : gateway_(gateway), prompts_(prompts), schema_(schema), config_(std::move(config)) {
    if (config_.parse_retries < 0) throw InvalidArgument("parse retry count must be >= 0");
    if (config_.workers < 1) throw InvalidArgument("worker count must be >= 1");
}

ModelRequest RefEvaluator::make_request(std::string user) const {
    ModelRequest request;
    request.user = std::move(user);
    request.params = config_.params;
    return request;
}

std::vector<ExtractedValue> RefEvaluator::extract_item_from_summary(
    const std::string& summary, const ChecklistItemDef& item, const std::string& label,
    std::vector<std::string>* notes) {
    if (is_blank(summary)) throw InvalidArgument("cannot extract from an empty summary");

    auto request = make_request(prompts_.get("checklist_extraction")
                                    .render({{"checklist_item_definition",
                                              format_item_definition(item)},
                                             {"case_summary", summary}}));

    std::optional<ParsedExtraction> parsed;
    for (int attempt = 0; attempt <= config_.parse_retries && !parsed; ++attempt) {
        auto reply = gateway_.complete(request, label).text;
        try {
            parsed = parse_extraction(reply, EvidenceShape::Strings);
        } catch (const ParseError& e) {
            add_note(notes, item.item_id + ": unparseable extraction reply (attempt " +
                                std::to_string(attempt + 1) + "): " + e.what());
        }
    }
    if (!parsed) {
        add_note(notes, item.item_id + ": extraction abandoned; treated as absent");
        return {};
    }

    const std::string hay = normalize_match_text(summary);
    std::vector<ExtractedValue> out;
    for (auto& value : parsed->extracted) {
        std::vector<Evidence> kept;
        for (auto& ev : value.evidence) {
            if (ev.text.empty()) {
                add_note(notes, item.item_id + ": empty evidence snippet dropped for '" +
                                    value.value + "'");
                continue;
            }
            if (hay.find(normalize_needle(ev.text)) == std::string::npos)
                add_note(notes, item.item_id + ": evidence not verbatim in summary: \"" +
                                    ev.text + "\"");
            kept.push_back(std::move(ev));
        }
        if (kept.empty()) {
            add_note(notes, item.item_id + ": protocol violation: value '" + value.value +
                                "' has no evidence; dropped");
            continue;
        }
        value.evidence = std::move(kept);
        out.push_back(std::move(value));
    }
    return out;
}

ComparisonOutcome RefEvaluator::compare_item(const ChecklistItemDef& item,
                                             const std::vector<ExtractedValue>& a,
                                             const std::vector<ExtractedValue>& b,
                                             const std::string& label,
                                             std::vector<std::string>* notes) {
    auto a_s = strip_not_applicable(a);
    auto b_s = strip_not_applicable(b);
    if (a_s.empty() && b_s.empty())
        throw InvalidArgument("comparison of '" + item.item_id +
                              "' needs content on at least one side");
    const std::string call_label = label.empty() ? "compare:" + item.item_id : label;

    if (item.cardinality == Cardinality::Multi)
        return compare_string_lists(item.display_name, item.item_id, value_strings(a_s),
                                    value_strings(b_s), call_label, notes);

    ComparisonOutcome out;
    out.item_id = item.item_id;
    out.kind = Cardinality::Single;
    if (a_s.empty() || b_s.empty()) {
        out.relation = SingleRelation::Different;
        return out;
    }
    const std::string info_a = join_values(a_s);
    const std::string info_b = join_values(b_s);
    if (normalize_needle(info_a) == normalize_needle(info_b)) {
        out.relation = SingleRelation::Equal;
        return out;
    }

    auto request = make_request(prompts_.get("compare_single")
                                    .render({{"checklist_category", item.display_name},
                                             {"information_A", info_a},
                                             {"information_B", info_b}}));
    for (int attempt = 0; attempt <= config_.parse_retries; ++attempt) {
        auto reply = gateway_.complete(request, call_label).text;
        try {
            out.relation = parse_single_compare(reply);
            return out;
        } catch (const ParseError& e) {
            add_note(notes, item.item_id + ": unparseable comparison verdict (attempt " +
                                std::to_string(attempt + 1) + "): " + e.what());
        }
    }
    out.relation = SingleRelation::Different;
    out.abstained = true;
    add_note(notes, item.item_id + ": comparison abstained; scored as different");
    return out;
}

ComparisonOutcome RefEvaluator::compare_string_lists(const std::string& category,
                                                     const std::string& item_id,
                                                     const std::vector<std::string>& a,
                                                     const std::vector<std::string>& b,
                                                     const std::string& label,
                                                     std::vector<std::string>* notes) {
    ComparisonOutcome out;
    out.item_id = item_id;
    out.kind = Cardinality::Multi;
    out.a_size = a.size();
    out.b_size = b.size();
    if (a.empty() || b.empty()) return out;

    bool identical = a.size() == b.size();
    for (std::size_t i = 0; identical && i < a.size(); ++i)
        identical = normalize_needle(a[i]) == normalize_needle(b[i]);
    if (identical) {
        for (std::size_t i = 0; i < a.size(); ++i) out.pairs.emplace_back(i, i);
        return out;
    }

    auto request = make_request(prompts_.get("compare_multi")
                                    .render({{"checklist_category", category},
                                             {"information_A", numbered_list(a)},
                                             {"information_B", numbered_list(b)}}));
    for (int attempt = 0; attempt <= config_.parse_retries; ++attempt) {
        auto reply = gateway_.complete(request, label).text;
        try {
            auto parsed = parse_multi_compare(reply, a.size(), b.size());
            if (parsed.dropped_entries > 0)
                add_note(notes, item_id + ": " + std::to_string(parsed.dropped_entries) +
                                    " invalid pair entries dropped");
            out.pairs = std::move(parsed.pairs);
            return out;
        } catch (const ParseError& e) {
            add_note(notes, item_id + ": unparseable list comparison (attempt " +
                                std::to_string(attempt + 1) + "): " + e.what());
        }
    }
    out.pairs.clear();
    out.abstained = true;
    add_note(notes, item_id + ": comparison abstained; scored as zero pairs");
    return out;
}

CoverageMap RefEvaluator::build_coverage_map(const std::string& summary,
                                             const SummaryExtraction& extraction) const {
    CoverageMap map;
    map.words = split_words(summary);
    map.covered.assign(map.words.size(), false);

    std::vector<std::string> word_toks(map.words.size());
    TokenIndex ti;
    for (std::size_t i = 0; i < map.words.size(); ++i) {
        word_toks[i] = word_token(std::string_view(summary).substr(
            map.words[i].begin, map.words[i].end - map.words[i].begin));
        if (!word_toks[i].empty()) {
            ti.word_index.push_back(i);
            ti.tokens.push_back(word_toks[i]);
        }
    }

    // Stage 1: extracted values. Stage 2: evidence snippets for whatever the
    // values left uncovered (marking is monotone, so applying both
    // unconditionally is equivalent).
    for (const auto& [item_id, values] : extraction.state.entries()) {
        for (const auto& value : values) {
            if (value.value == kNotApplicable) continue;
            mark_needle(ti, normalized_word_tokens(value.value), map.covered);
        }
    }
    for (const auto& [item_id, values] : extraction.state.entries()) {
        for (const auto& value : values) {
            if (value.value == kNotApplicable) continue;
            for (const auto& ev : value.evidence)
                mark_needle(ti, normalized_word_tokens(ev.text), map.covered);
        }
    }

    // Punctuation-only words carry no content: they inherit the label of the
    // preceding word (following word at the front) instead of fragmenting
    // spans.
    std::optional<bool> prev;
    for (std::size_t i = 0; i < map.words.size(); ++i) {
        if (word_toks[i].empty()) {
            if (prev) map.covered[i] = *prev;
        } else {
            prev = map.covered[i];
        }
    }
    if (prev.has_value()) { // backfill any leading punctuation-only words
        std::size_t first_real = 0;
        while (word_toks[first_real].empty()) ++first_real;
        for (std::size_t i = 0; i < first_real; ++i)
            map.covered[i] = map.covered[first_real];
    }

    auto flush = [&](std::size_t first, std::size_t last, bool covered_run) {
        auto span = std::make_pair(map.words[first].begin, map.words[last].end);
        if (covered_run) {
            map.covered_spans.push_back(span);
        } else {
            map.residual_spans.push_back(span);
            map.residual_span_texts.push_back(
                summary.substr(span.first, span.second - span.first));
        }
    };
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= map.words.size(); ++i) {
        if (i == map.words.size() || map.covered[i] != map.covered[run_start]) {
            if (!map.words.empty()) flush(run_start, i - 1, map.covered[run_start]);
            run_start = i;
        }
    }
    return map;
}

std::vector<ResidualFact> RefEvaluator::extract_residual_facts(
    const std::vector<std::string>& spans, const std::string& label,
    std::vector<std::string>* notes) {
    if (spans.empty()) return {};

    auto request = make_request(
        prompts_.get("residual_facts").render({{"text_spans", numbered_list(spans)}}));
    for (int attempt = 0; attempt <= config_.parse_retries; ++attempt) {
        auto reply = gateway_.complete(request, label).text;
        try {
            auto parsed = parse_residual_facts(reply, spans.size());
            if (parsed.dropped_facts > 0)
                add_note(notes, std::to_string(parsed.dropped_facts) +
                                    " facts dropped for out-of-range span indices");
            return std::move(parsed.facts);
        } catch (const ParseError& e) {
            add_note(notes, "unparseable residual-facts reply (attempt " +
                                std::to_string(attempt + 1) + "): " + e.what());
        }
    }
    add_note(notes, "residual fact extraction abandoned; treated as none");
    return {};
}

ComparisonOutcome RefEvaluator::compare_residual_facts(
    const std::vector<ResidualFact>& model_facts,
    const std::vector<ResidualFact>& reference_facts, const std::string& label,
    std::vector<std::string>* notes) {
    auto strings = [](const std::vector<ResidualFact>& facts) {
        std::vector<std::string> out;
        out.reserve(facts.size());
        for (const auto& f : facts) out.push_back(f.fact);
        return out;
    };
    const std::string call_label = label.empty() ? "compare:residual_facts" : label;
    return compare_string_lists("Residual Facts", "residual_facts", strings(model_facts),
                                strings(reference_facts), call_label, notes);
}

StyleRating RefEvaluator::rate_style(const std::string& summary_a,
                                     const std::string& summary_b,
                                     std::vector<std::string>* notes) {
    if (is_blank(summary_a) || is_blank(summary_b))
        throw InvalidArgument("style rating needs two nonempty summaries");
    if (config_.style_rubric.empty())
        throw ConfigError("style aspect definitions are not configured");

    auto request = make_request(
        prompts_.get("style_rating")
            .render({{"summary_A", summary_a},
                     {"summary_B", summary_b},
                     {"all_5_aspects_definitions", config_.style_rubric}}));
    for (int attempt = 0; attempt <= config_.parse_retries; ++attempt) {
        auto reply = gateway_.complete(request, "style").text;
        try {
            auto parsed = parse_style_scores(reply);
            if (parsed.adjusted > 0)
                add_note(notes, std::to_string(parsed.adjusted) +
                                    " style ratings adjusted into [1,5]");
            StyleRating rating;
            rating.scores = parsed.scores;
            return rating;
        } catch (const ParseError& e) {
            add_note(notes, "unparseable style reply (attempt " +
                                std::to_string(attempt + 1) + "): " + e.what());
        }
    }
    add_note(notes, "style rating abstained; floored to all 1s");
    StyleRating rating;
    rating.scores = {1, 1, 1, 1, 1};
    rating.abstained = true;
    return rating;
}

RawEvaluation RefEvaluator::evaluate_pair(const std::string& model_summary,
                                          const std::string& reference_summary) {
    if (is_blank(model_summary)) throw InvalidArgument("model summary is empty");
    if (is_blank(reference_summary)) throw InvalidArgument("reference summary is empty");

    const auto& items = schema_.items();
    const std::size_t n = items.size();
    std::vector<std::vector<ExtractedValue>> model_vals(n), ref_vals(n);
    std::vector<std::optional<ComparisonOutcome>> outcomes(n);
    std::vector<std::vector<std::string>> item_notes(n);

    parallel_for(n, config_.workers, [&](std::size_t i) {
        const auto& item = items[i];
        model_vals[i] = extract_item_from_summary(model_summary, item,
                                                  "extract:model:" + item.item_id,
                                                  &item_notes[i]);
        ref_vals[i] = extract_item_from_summary(reference_summary, item,
                                                "extract:reference:" + item.item_id,
                                                &item_notes[i]);
        bool a_filled = !strip_not_applicable(model_vals[i]).empty();
        bool b_filled = !strip_not_applicable(ref_vals[i]).empty();
        if (a_filled || b_filled)
            outcomes[i] = compare_item(item, model_vals[i], ref_vals[i],
                                       "compare:" + item.item_id, &item_notes[i]);
    });

    RawEvaluation raw;
    raw.model_extraction.summary_text = model_summary;
    raw.reference_extraction.summary_text = reference_summary;
    for (std::size_t i = 0; i < n; ++i) {
        if (!model_vals[i].empty())
            raw.model_extraction.state.set(items[i].item_id, model_vals[i]);
        if (!ref_vals[i].empty())
            raw.reference_extraction.state.set(items[i].item_id, ref_vals[i]);
        if (outcomes[i]) raw.outcomes.push_back(std::move(*outcomes[i]));
    }

    raw.model_coverage = build_coverage_map(model_summary, raw.model_extraction);
    raw.reference_coverage = build_coverage_map(reference_summary, raw.reference_extraction);

    std::vector<std::string> residual_model_notes, residual_reference_notes,
        residual_compare_notes, style_notes;
    raw.model_facts = extract_residual_facts(raw.model_coverage.residual_span_texts,
                                             "residual:model", &residual_model_notes);
    raw.reference_facts =
        extract_residual_facts(raw.reference_coverage.residual_span_texts,
                               "residual:reference", &residual_reference_notes);
    raw.residual_outcome = compare_residual_facts(raw.model_facts, raw.reference_facts,
                                                  "residual:compare",
                                                  &residual_compare_notes);
    raw.style = rate_style(model_summary, reference_summary, &style_notes);

    raw.diagnostics = nlohmann::json::object();
    for (std::size_t i = 0; i < n; ++i)
        if (!item_notes[i].empty()) raw.diagnostics[items[i].item_id] = item_notes[i];
    if (!residual_model_notes.empty())
        raw.diagnostics["residual:model"] = residual_model_notes;
    if (!residual_reference_notes.empty())
        raw.diagnostics["residual:reference"] = residual_reference_notes;
    if (!residual_compare_notes.empty())
        raw.diagnostics["residual:compare"] = residual_compare_notes;
    if (!style_notes.empty()) raw.diagnostics["style"] = style_notes;
    return raw;
}

nlohmann::json RawEvaluation::to_json(const ChecklistSchema& schema) const {
    auto facts_json = [](const std::vector<ResidualFact>& fs) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& f : fs) {
            nlohmann::json spans = nlohmann::json::array();
            for (auto s : f.evidence_spans) spans.push_back(s);
            j.push_back({{"fact", f.fact}, {"evidence_spans", std::move(spans)}});
        }
        return j;
    };
    nlohmann::json outcome_list = nlohmann::json::array();
    for (const auto& o : outcomes) outcome_list.push_back(outcome_to_json(o));

    nlohmann::json style_scores;
    for (std::size_t i = 0; i < kStyleAspects.size(); ++i)
        style_scores[std::string(kStyleAspects[i])] = style.scores[i];

    return nlohmann::json{
        {"model",
         {{"summary", model_extraction.summary_text},
          {"state", state_to_json(model_extraction.state, schema.version())}}},
        {"reference",
         {{"summary", reference_extraction.summary_text},
          {"state", state_to_json(reference_extraction.state, schema.version())}}},
        {"outcomes", std::move(outcome_list)},
        {"model_coverage", model_coverage.to_json()},
        {"reference_coverage", reference_coverage.to_json()},
        {"model_facts", facts_json(model_facts)},
        {"reference_facts", facts_json(reference_facts)},
        {"residual_outcome", outcome_to_json(residual_outcome)},
        {"style", {{"scores", std::move(style_scores)}, {"abstained", style.abstained}}},
        {"diagnostics", diagnostics.is_null() ? nlohmann::json::object() : diagnostics}};
}

ScoreReport score_evaluation(const RawEvaluation& raw, const ChecklistSchema& schema,
                             double alpha) {
    std::map<std::string, const ComparisonOutcome*> by_item;
    for (const auto& o : raw.outcomes) by_item[o.item_id] = &o;

    ScoreReport report;
    report.alpha = alpha;
    for (const auto& item : schema.items()) {
        ItemScore score;
        score.item_id = item.item_id;
        bool model_filled =
            !strip_not_applicable(raw.model_extraction.state.values(item.item_id)).empty();
        bool reference_filled =
            !strip_not_applicable(raw.reference_extraction.state.values(item.item_id))
                 .empty();
        score.applicable = model_filled || reference_filled;
        if (score.applicable) {
            auto it = by_item.find(item.item_id);
            if (it == by_item.end())
                throw InvalidArgument("applicable item '" + item.item_id +
                                      "' has no comparison outcome");
            score.m = matching_score(*it->second, item.cardinality);
            score.abstained = it->second->abstained;
            score.overspecified = model_filled && !reference_filled;
            score.underspecified = reference_filled && !model_filled;
        }
        report.item_scores.push_back(std::move(score));
    }

    report.s_checklist = checklist_score(report.item_scores);
    report.s_residual = residual_score(raw.residual_outcome);
    report.s_style = style_score(raw.style);
    report.r = residual_ratio(raw.reference_coverage.residual_spans,
                              raw.reference_extraction.summary_text);
    report.s_overall =
        overall_score(report.s_checklist, report.s_residual, report.s_style, report.r, alpha);
    return report;
}

} // namespace lexeval
