// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <memory>

#include "lexeval/errors.hpp"
#include "lexeval/ref_eval.hpp"

using namespace lexeval;
namespace fs = std::filesystem;

namespace {

const ChecklistSchema& schema() {
    static ChecklistSchema s =
        ChecklistSchema::load(fs::path(LEXEVAL_DATA_DIR) / "checklist_schema.json");
    return s;
}

const PromptSet& prompts() {
    static PromptSet p = PromptSet::load(fs::path(LEXEVAL_DATA_DIR) / "prompts");
    return p;
}

struct Rig {
    std::shared_ptr<MockBackend> mock;
    std::unique_ptr<ModelGateway> gateway;
    std::unique_ptr<RefEvaluator> evaluator;

    explicit Rig(const nlohmann::json& script, EvalConfig config = {}) {
        Tokenizer tok;
        mock = std::make_shared<MockBackend>(script, tok);
        gateway = std::make_unique<ModelGateway>(mock, tok);
        if (config.style_rubric.empty()) config.style_rubric = "## Aspects\n(rubric text)";
        evaluator =
            std::make_unique<RefEvaluator>(*gateway, prompts(), schema(), std::move(config));
    }
};

ExtractedValue val(std::string value, std::string evidence_text) {
    ExtractedValue v;
    v.value = std::move(value);
    v.evidence.push_back({std::move(evidence_text), "summary", ""});
    return v;
}

nlohmann::json rule(std::string name, std::vector<std::string> user_contains,
                    std::string reply) {
    return nlohmann::json{{"name", std::move(name)},
                          {"match", {{"user_contains", std::move(user_contains)}}},
                          {"reply", std::move(reply)}};
}

} // namespace

TEST_SUITE("ref_extraction") {

TEST_CASE("values and evidence pass through; absent items come back empty") {
    nlohmann::json script{
        {"rules",
         {rule("filing-date", {"identify Filing Date:"},
               R"({"reasoning": "found it", "extracted": [
                   {"evidence": ["was filed on May 5, 2020"], "value": "May 5, 2020"},
                   {"evidence": ["later amended"], "value": "amended complaint"}]})")}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    Rig rig(script);

    std::string summary = "The case was filed on May 5, 2020 and later amended.";
    auto values = rig.evaluator->extract_item_from_summary(
        summary, schema().item("filing_date"), "extract:t:filing_date");
    REQUIRE(values.size() == 2);
    CHECK(values[0].value == "May 5, 2020");
    CHECK(values[0].evidence[0].source == "summary");

    auto none = rig.evaluator->extract_item_from_summary(
        summary, schema().item("settlement_terms"), "extract:t:settlement_terms");
    CHECK(none.empty());

    CHECK_THROWS_AS(rig.evaluator->extract_item_from_summary(
                        "   ", schema().item("filing_date"), "x"),
                    InvalidArgument);
}

TEST_CASE("evidence-free values are dropped as protocol violations") {
    nlohmann::json script{
        {"rules",
         {rule("bare", {"identify Filing Date:"},
               R"({"extracted": [{"evidence": [], "value": "May 5, 2020"},
                                 {"evidence": ["filed May 5"], "value": "kept"}]})")}}};
    Rig rig(script);
    std::vector<std::string> notes;
    auto values = rig.evaluator->extract_item_from_summary(
        "It was filed May 5.", schema().item("filing_date"), "t", &notes);
    REQUIRE(values.size() == 1);
    CHECK(values[0].value == "kept");
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("protocol violation") != std::string::npos);
}

TEST_CASE("non-verbatim evidence is kept but flagged") {
    nlohmann::json script{
        {"rules",
         {rule("drift", {"identify Filing Date:"},
               R"({"extracted": [{"evidence": ["filed in March 2019"], "value": "March 2019"}]})")}}};
    Rig rig(script);
    std::vector<std::string> notes;
    auto values = rig.evaluator->extract_item_from_summary(
        "The action commenced in spring.", schema().item("filing_date"), "t", &notes);
    REQUIRE(values.size() == 1);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("not verbatim") != std::string::npos);

    // Normalized (case/whitespace) variants are verbatim, not flagged.
    notes.clear();
    nlohmann::json script2{
        {"rules",
         {rule("norm", {"identify Filing Date:"},
               R"({"extracted": [{"evidence": ["FILED  on march 3"], "value": "March 3"}]})")}}};
    Rig rig2(script2);
    rig2.evaluator->extract_item_from_summary("It was Filed on March 3.",
                                              schema().item("filing_date"), "t", &notes);
    CHECK(notes.empty());
}

TEST_CASE("a permanently unparseable reply degrades to empty after retries") {
    nlohmann::json script{{"default_reply", "I refuse to answer in JSON."}};
    Rig rig(script);
    std::vector<std::string> notes;
    auto values = rig.evaluator->extract_item_from_summary(
        "Some summary.", schema().item("filing_date"), "extract:t:filing_date", &notes);
    CHECK(values.empty());
    // 1 initial attempt + 2 re-prompts, then the abandonment note.
    CHECK(rig.gateway->ledger().for_label("extract:t:filing_date").calls == 3);
    REQUIRE(notes.size() == 4);
    CHECK(notes.back().find("abandoned") != std::string::npos);
}

} // TEST_SUITE

TEST_SUITE("ref_compare") {

TEST_CASE("identical single values resolve without a model call") {
    Rig rig(nlohmann::json{{"default_reply", "never used"}});
    auto a = std::vector<ExtractedValue>{val("May 5, 2020", "e")};
    auto b = std::vector<ExtractedValue>{val("may 5,  2020", "e")};
    auto outcome = rig.evaluator->compare_item(schema().item("filing_date"), a, b);
    CHECK(outcome.relation == SingleRelation::Equal);
    CHECK(rig.gateway->ledger().total().calls == 0);
}

TEST_CASE("empty versus nonempty short-circuits to different or zero pairs") {
    Rig rig(nlohmann::json{{"default_reply", "never used"}});
    auto filled = std::vector<ExtractedValue>{val("May 5, 2020", "e")};

    auto single = rig.evaluator->compare_item(schema().item("filing_date"), {}, filled);
    CHECK(single.relation == SingleRelation::Different);

    auto multi = rig.evaluator->compare_item(schema().item("court_rulings"), filled, {});
    CHECK(multi.kind == Cardinality::Multi);
    CHECK(multi.pairs.empty());
    CHECK(multi.a_size == 1);
    CHECK(multi.b_size == 0);
    CHECK(rig.gateway->ledger().total().calls == 0);

    CHECK_THROWS_AS(rig.evaluator->compare_item(schema().item("filing_date"), {}, {}),
                    InvalidArgument);
}

TEST_CASE("not-applicable entries are stripped before everything else") {
    Rig rig(nlohmann::json{{"default_reply", "never used"}});
    auto na = std::vector<ExtractedValue>{val(std::string(kNotApplicable), "e")};
    auto filled = std::vector<ExtractedValue>{val("May 5, 2020", "e")};
    auto outcome = rig.evaluator->compare_item(schema().item("filing_date"), na, filled);
    CHECK(outcome.relation == SingleRelation::Different);
    CHECK(rig.gateway->ledger().total().calls == 0);
}

TEST_CASE("the single prompt verdict is parsed and mapped") {
    nlohmann::json script{
        {"rules",
         {rule("verdict", {"# Relationship Options", "Filing Date"},
               "**Reasoning:** same date, more detail in A\n**Final Answer:** A contains B")}}};
    Rig rig(script);
    auto a = std::vector<ExtractedValue>{val("May 5, 2020, docket 1", "e")};
    auto b = std::vector<ExtractedValue>{val("May 2020", "e")};
    auto outcome = rig.evaluator->compare_item(schema().item("filing_date"), a, b);
    CHECK(outcome.relation == SingleRelation::AContainsB);
    CHECK(rig.gateway->ledger().total().calls == 1);
}

TEST_CASE("multi comparison parses pairs; five versus five with three pairs") {
    nlohmann::json script{
        {"rules",
         {rule("pairs", {"## List A:", "Remedy Sought"},
               R"(**Final Answer:**
               {"common": [{"A_index": 1, "B_index": 2}, {"A_index": 2, "B_index": 1},
                           {"A_index": 5, "B_index": 5}],
                "only_in_A": [3, 4], "only_in_B": [3, 4]})")}}};
    Rig rig(script);
    std::vector<ExtractedValue> a, b;
    for (int i = 0; i < 5; ++i) {
        a.push_back(val("remedy A" + std::to_string(i), "e"));
        b.push_back(val("remedy B" + std::to_string(i), "e"));
    }
    auto outcome = rig.evaluator->compare_item(schema().item("remedy_sought"), a, b);
    REQUIRE(outcome.pairs.size() == 3);
    CHECK(outcome.a_size == 5);
    CHECK(outcome.b_size == 5);
    CHECK(matching_score(outcome, Cardinality::Multi) == doctest::Approx(0.6));
    CHECK(outcome.only_in_a() == std::vector<std::size_t>{2, 3});
}

TEST_CASE("identical multi lists fully pair without a call") {
    Rig rig(nlohmann::json{{"default_reply", "never used"}});
    std::vector<ExtractedValue> a{val("first ruling", "e"), val("second ruling", "e")};
    auto outcome = rig.evaluator->compare_item(schema().item("court_rulings"), a, a);
    REQUIRE(outcome.pairs.size() == 2);
    CHECK(outcome.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(rig.gateway->ledger().total().calls == 0);
}

TEST_CASE("an unparseable verdict abstains conservatively") {
    nlohmann::json script{{"default_reply", "shrug"}};
    Rig rig(script);
    std::vector<std::string> notes;
    auto a = std::vector<ExtractedValue>{val("May 5, 2020", "e")};
    auto b = std::vector<ExtractedValue>{val("June 6, 2021", "e")};
    auto outcome =
        rig.evaluator->compare_item(schema().item("filing_date"), a, b, "cmp", &notes);
    CHECK(outcome.relation == SingleRelation::Different);
    CHECK(outcome.abstained);
    CHECK(rig.gateway->ledger().for_label("cmp").calls == 3);
}

TEST_CASE("swap symmetry with a symmetric script") {
    // The script answers by content, so both orientations get consistent
    // verdicts: A/B swap flips the containment direction.
    nlohmann::json script{
        {"rules",
         {{{"name", "long-first"},
           {"match",
            {{"user_contains",
              {"## Information A:\nMay 5, 2020, docket 12"}}}},
           {"reply", "**Final Answer:** A contains B"}},
          {{"name", "short-first"},
           {"match", {{"user_contains", {"## Information A:\nMay 2020"}}}},
           {"reply", "**Final Answer:** B contains A"}}}}};
    Rig rig(script);
    auto a = std::vector<ExtractedValue>{val("May 5, 2020, docket 12", "e")};
    auto b = std::vector<ExtractedValue>{val("May 2020", "e")};
    auto ab = rig.evaluator->compare_item(schema().item("filing_date"), a, b);
    auto ba = rig.evaluator->compare_item(schema().item("filing_date"), b, a);
    CHECK(ab.relation == SingleRelation::AContainsB);
    CHECK(ba.relation == SingleRelation::BContainsA);
    CHECK(swap_sides(ab).relation == ba.relation);
}

} // TEST_SUITE

TEST_SUITE("coverage_map") {

TEST_CASE("empty extraction leaves every word residual") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    SummaryExtraction ex;
    ex.summary_text = "Alpha beta gamma.";
    auto map = rig.evaluator->build_coverage_map(ex.summary_text, ex);
    CHECK(map.covered == std::vector<bool>{false, false, false});
    REQUIRE(map.residual_spans.size() == 1);
    CHECK(map.residual_span_texts[0] == "Alpha beta gamma.");
    CHECK(map.covered_spans.empty());
}

TEST_CASE("evidence equal to the whole summary covers every word") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    SummaryExtraction ex;
    ex.summary_text = "The court entered judgment in 2020.";
    ex.state.set("court_rulings", {val("judgment", ex.summary_text)});
    auto map = rig.evaluator->build_coverage_map(ex.summary_text, ex);
    CHECK(std::all_of(map.covered.begin(), map.covered.end(), [](bool c) { return c; }));
    CHECK(map.residual_spans.empty());
    REQUIRE(map.covered_spans.size() == 1);
    CHECK(map.covered_spans[0] ==
          std::pair<std::size_t, std::size_t>{0, ex.summary_text.size()});
}

TEST_CASE("values cover first, evidence covers the rest") {
    // Four-word toy: value matches word 2, evidence matches words 3-4, so
    // only word 1 stays residual.
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    SummaryExtraction ex;
    ex.summary_text = "Apple Banana Cherry Date";
    ex.state.set("parties", {val("Banana", "Cherry Date")});
    auto map = rig.evaluator->build_coverage_map(ex.summary_text, ex);
    CHECK(map.covered == std::vector<bool>{false, true, true, true});
    REQUIRE(map.residual_spans.size() == 1);
    CHECK(map.residual_span_texts[0] == "Apple");
}

TEST_CASE("stage one coverage is a subset of the final coverage") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    std::string summary = "One two three four five six seven.";
    SummaryExtraction values_only;
    values_only.summary_text = summary;
    ExtractedValue v = val("two three", "five six");
    ExtractedValue values_sans_evidence = v;
    values_sans_evidence.evidence.clear();
    values_sans_evidence.evidence.push_back({"two three", "summary", ""});
    values_only.state.set("parties", {values_sans_evidence});

    SummaryExtraction full;
    full.summary_text = summary;
    full.state.set("parties", {v});

    auto stage1 = rig.evaluator->build_coverage_map(summary, values_only);
    auto final_map = rig.evaluator->build_coverage_map(summary, full);
    for (std::size_t i = 0; i < stage1.covered.size(); ++i)
        if (stage1.covered[i]) CHECK(final_map.covered[i]);
}

TEST_CASE("near-miss evidence still covers through the fuzzy fallback") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    SummaryExtraction ex;
    ex.summary_text = "The consent decree mandated monitoring of the prison.";
    // 4 of 5 needle tokens appear in a 5-token window: containment 0.8.
    ex.state.set("decree_significant_terms",
                 {val("irrelevant", "the consent decree required monitoring")});
    auto map = rig.evaluator->build_coverage_map(ex.summary_text, ex);
    CHECK(std::count(map.covered.begin(), map.covered.end(), true) == 5);
}

TEST_CASE("punctuation-only words inherit their neighbor's label") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    SummaryExtraction ex;
    ex.summary_text = "Judgment entered -- case closed";
    ex.state.set("court_rulings", {val("Judgment entered", "case closed")});
    auto map = rig.evaluator->build_coverage_map(ex.summary_text, ex);
    CHECK(map.covered == std::vector<bool>{true, true, true, true, true});
    CHECK(map.residual_spans.empty());
}

} // TEST_SUITE

TEST_SUITE("residual_facts") {

TEST_CASE("no spans means no call and no facts") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    CHECK(rig.evaluator->extract_residual_facts({}, "residual:t").empty());
    CHECK(rig.gateway->ledger().total().calls == 0);
}

TEST_CASE("facts parse and out-of-range citations are dropped") {
    nlohmann::json script{
        {"rules",
         {rule("facts", {"# Text Spans"},
               R"({"extracted": [
                   {"fact": "the court retained jurisdiction", "evidence_spans": [1]},
                   {"fact": "out of range", "evidence_spans": [5]}]})")}}};
    Rig rig(script);
    std::vector<std::string> notes;
    auto facts = rig.evaluator->extract_residual_facts({"span one", "span two"},
                                                       "residual:t", &notes);
    REQUIRE(facts.size() == 1);
    CHECK(facts[0].fact == "the court retained jurisdiction");
    CHECK(facts[0].evidence_spans == std::vector<std::size_t>{0});
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("dropped") != std::string::npos);
}

TEST_CASE("both fact lists empty is a valid zero-pair outcome") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    auto outcome = rig.evaluator->compare_residual_facts({}, {});
    CHECK(outcome.kind == Cardinality::Multi);
    CHECK(outcome.a_size == 0);
    CHECK(outcome.b_size == 0);
    CHECK(rig.gateway->ledger().total().calls == 0);
    CHECK(residual_score(outcome) == 0.0);
}

} // TEST_SUITE

TEST_SUITE("style_rating") {

TEST_CASE("five ratings parse; out-of-range values clamp with a note") {
    nlohmann::json script{
        {"rules",
         {rule("style", {"five specific dimensions"},
               R"(**Scores:** {"readability_jargon": 7, "narrative_order": 4,
                  "sentence_structure": 3, "formatting_layout": 2, "citation_style": 1})")}}};
    Rig rig(script);
    std::vector<std::string> notes;
    auto rating = rig.evaluator->rate_style("Summary one text.", "Summary two text.", &notes);
    CHECK(rating.scores == std::array<int, 5>{5, 4, 3, 2, 1});
    CHECK_FALSE(rating.abstained);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("adjusted") != std::string::npos);
    CHECK(style_score(rating) == doctest::Approx(50.0));
}

TEST_CASE("an unparseable style reply floors to all ones, abstained") {
    Rig rig(nlohmann::json{{"default_reply", "no json"}});
    auto rating = rig.evaluator->rate_style("A text.", "B text.");
    CHECK(rating.scores == std::array<int, 5>{1, 1, 1, 1, 1});
    CHECK(rating.abstained);
    CHECK(style_score(rating) == 0.0);
}

TEST_CASE("blank summaries are rejected") {
    Rig rig(nlohmann::json{{"default_reply", "unused"}});
    CHECK_THROWS_AS(rig.evaluator->rate_style("", "B"), InvalidArgument);
    CHECK_THROWS_AS(rig.evaluator->rate_style("A", "  \n"), InvalidArgument);
}

} // TEST_SUITE

namespace {

// Script for full-pipeline tests: extraction keyed by item and summary
// content, residual facts keyed by span content, style keyed by the style
// prompt. Every rule is a pure function of the request, so results are
// independent of call order and worker count.
nlohmann::json pipeline_script() {
    nlohmann::json rules = nlohmann::json::array();
    rules.push_back(rule(
        "filing-date", {"identify Filing Date:", "filed on May 5, 2020"},
        R"({"extracted": [{"evidence": ["filed on May 5, 2020"], "value": "May 5, 2020"}]})"));
    rules.push_back(rule(
        "rulings", {"identify Court Rulings:", "granted summary judgment"},
        R"({"extracted": [
            {"evidence": ["granted summary judgment"], "value": "summary judgment granted"},
            {"evidence": ["denied the stay"], "value": "stay denied"}]})"));
    rules.push_back(rule("facts", {"# Text Spans"},
                         R"({"extracted": [{"fact": "monitoring continued",
                                            "evidence_spans": [1]}]})"));
    rules.push_back(rule("style", {"five specific dimensions"},
                         R"(**Scores:** {"readability_jargon": 5, "narrative_order": 5,
                            "sentence_structure": 5, "formatting_layout": 5,
                            "citation_style": 5})"));
    return nlohmann::json{{"rules", std::move(rules)},
                          {"default_reply", R"({"reasoning": "-", "extracted": []})"}};
}

const std::string kPairSummary =
    "The suit was filed on May 5, 2020. The court granted summary judgment and "
    "denied the stay. Monitoring under the decree continued into 2023.";

} // namespace

TEST_SUITE("evaluate_pair") {

TEST_CASE("a summary against itself scores a perfect checklist") {
    Rig rig(pipeline_script());
    auto raw = rig.evaluator->evaluate_pair(kPairSummary, kPairSummary);

    // filing_date (single) and court_rulings (multi) are the applicable items.
    REQUIRE(raw.outcomes.size() == 2);
    for (const auto& outcome : raw.outcomes) {
        if (outcome.kind == Cardinality::Single) {
            CHECK(outcome.relation == SingleRelation::Equal);
        } else {
            CHECK(outcome.pairs.size() == outcome.a_size);
            CHECK(outcome.a_size == outcome.b_size);
        }
    }

    auto report = score_evaluation(raw, schema(), 0.9);
    CHECK(report.s_checklist == 100.0);
    CHECK(report.s_residual == 100.0); // identical fact lists pair fully
    CHECK(report.s_style == 100.0);
    CHECK(report.s_overall == doctest::Approx(100.0));
    CHECK(report.r > 0.0); // "Monitoring ... continued" words are residual

    std::size_t applicable = 0;
    for (const auto& item : report.item_scores) {
        if (item.applicable) ++applicable;
        CHECK_FALSE(item.overspecified);
        CHECK_FALSE(item.underspecified);
    }
    CHECK(applicable == 2);
}

TEST_CASE("empty summaries are rejected") {
    Rig rig(pipeline_script());
    CHECK_THROWS_AS(rig.evaluator->evaluate_pair("", kPairSummary), InvalidArgument);
    CHECK_THROWS_AS(rig.evaluator->evaluate_pair(kPairSummary, " \n "), InvalidArgument);
}

TEST_CASE("results are byte-identical across runs and worker counts") {
    auto run = [&](int workers) {
        EvalConfig config;
        config.workers = workers;
        Rig rig(pipeline_script(), std::move(config));
        auto raw = rig.evaluator->evaluate_pair(kPairSummary, kPairSummary);
        return raw.to_json(schema()).dump(2) + "\n" +
               rig.gateway->transcript_json().dump(2);
    };
    auto first = run(1);
    CHECK(run(1) == first);
    CHECK(run(4) == first);
}

TEST_CASE("mismatched summaries produce asymmetric specification flags") {
    // The model side lacks the rulings sentence, so court_rulings is
    // reference-only: underspecified, compared as empty-vs-filled.
    Rig rig(pipeline_script());
    std::string model = "The suit was filed on May 5, 2020.";
    auto raw = rig.evaluator->evaluate_pair(model, kPairSummary);
    auto report = score_evaluation(raw, schema(), 0.9);

    const ItemScore* rulings = nullptr;
    const ItemScore* filing = nullptr;
    for (const auto& item : report.item_scores) {
        if (item.item_id == "court_rulings") rulings = &item;
        if (item.item_id == "filing_date") filing = &item;
    }
    REQUIRE(rulings);
    REQUIRE(filing);
    CHECK(rulings->applicable);
    CHECK(rulings->underspecified);
    CHECK(*rulings->m == 0.0);
    CHECK(filing->applicable);
    CHECK_FALSE(filing->underspecified);
    CHECK(*filing->m == 1.0);
    CHECK(report.s_checklist == doctest::Approx(50.0));
}

} // TEST_SUITE

TEST_SUITE("score_evaluation_oracle") {

TEST_CASE("hand-built raw evaluation reproduces every component") {
    RawEvaluation raw;
    raw.model_extraction.summary_text = "model summary text here";
    raw.reference_extraction.summary_text = std::string(100, 'r');

    raw.model_extraction.state.set("filing_date", {val("May 5", "e")});
    raw.reference_extraction.state.set("filing_date", {val("May 5 2020", "e")});
    raw.model_extraction.state.set("parties", {val("Doe", "e"), val("Roe", "e")});
    raw.reference_extraction.state.set("parties",
                                       {val("Doe", "e"), val("Poe", "e"), val("Moe", "e")});

    ComparisonOutcome filing;
    filing.item_id = "filing_date";
    filing.kind = Cardinality::Single;
    filing.relation = SingleRelation::BContainsA;
    ComparisonOutcome parties;
    parties.item_id = "parties";
    parties.kind = Cardinality::Multi;
    parties.a_size = 2;
    parties.b_size = 3;
    parties.pairs = {{0, 0}};
    raw.outcomes = {filing, parties};

    // Reference coverage: 60 of 100 chars residual.
    raw.reference_coverage.residual_spans = {{0, 25}, {40, 75}};
    raw.model_coverage.residual_spans = {{0, 5}};

    ComparisonOutcome residual;
    residual.kind = Cardinality::Multi;
    residual.a_size = 4;
    residual.b_size = 5;
    residual.pairs = {{0, 0}, {1, 1}, {2, 2}};
    raw.residual_outcome = residual;

    raw.style.scores = {3, 3, 3, 3, 3};

    auto report = score_evaluation(raw, schema(), 0.9);
    // m: filing 0.5, parties 2*1/5 = 0.4 -> S_checklist = 45.
    CHECK(report.s_checklist == doctest::Approx(45.0));
    CHECK(report.s_residual == doctest::Approx(100.0 * 6.0 / 9.0));
    CHECK(report.s_style == doctest::Approx(50.0));
    CHECK(report.r == doctest::Approx(0.6));
    double expected = 0.9 * (0.4 * 45.0 + 0.6 * 100.0 * 6.0 / 9.0) + 0.1 * 50.0;
    CHECK(report.s_overall == doctest::Approx(expected));

    // Items the states never filled are inapplicable.
    std::size_t applicable = 0;
    for (const auto& item : report.item_scores)
        if (item.applicable) ++applicable;
    CHECK(applicable == 2);
    CHECK(report.item_scores.size() == schema().items().size());
}

TEST_CASE("zero applicable items surfaces the undefined score") {
    RawEvaluation raw;
    raw.model_extraction.summary_text = "m";
    raw.reference_extraction.summary_text = "r";
    raw.residual_outcome.kind = Cardinality::Multi;
    raw.style.scores = {1, 1, 1, 1, 1};
    CHECK_THROWS_AS(score_evaluation(raw, schema(), 0.9), UndefinedScore);
}

} // TEST_SUITE
