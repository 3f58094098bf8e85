// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "lexeval/checklist.hpp"
#include "lexeval/errors.hpp"

using namespace lexeval;

namespace {

const ChecklistSchema& schema() {
    static ChecklistSchema s =
        ChecklistSchema::load(std::filesystem::path(LEXEVAL_DATA_DIR) / "checklist_schema.json");
    return s;
}

ExtractedValue ev(std::string value, std::string text = "snippet") {
    ExtractedValue v;
    v.value = std::move(value);
    v.evidence.push_back({std::move(text), "summary", ""});
    return v;
}

} // namespace

TEST_CASE("shipped schema has 26 items in 9 groups") {
    const auto& s = schema();
    CHECK(s.items().size() == 26);
    auto groups = s.group_partition();
    CHECK(groups.size() == 9);
    std::size_t total = 0;
    std::set<std::string> seen;
    for (const auto& [group, ids] : groups) {
        CHECK(!ids.empty());
        total += ids.size();
        for (const auto& id : ids) {
            CHECK(seen.insert(id).second);
            CHECK(s.item(id).group == group);
        }
    }
    CHECK(total == 26);
    CHECK(s.item("filing_date").cardinality == Cardinality::Single);
    CHECK(s.item("class_action_or_individual").cardinality == Cardinality::Single);
    CHECK(s.item("settlement_court_enforcement").cardinality == Cardinality::Single);
    CHECK(s.item("judge_name").cardinality == Cardinality::Multi);
    CHECK_THROWS_AS(s.item("no_such_item"), SchemaViolation);
}

TEST_CASE("append extends and update replaces") {
    ChecklistState state;
    ChecklistPatch add;
    add.changes.push_back({"judge_name", {ev("Judge A")}});
    state = apply_patch(schema(), state, add);
    ChecklistPatch more;
    more.changes.push_back({"judge_name", {ev("Judge B")}});
    state = apply_patch(schema(), state, more);
    REQUIRE(state.values("judge_name").size() == 2);
    CHECK(state.values("judge_name")[0].value == "Judge A");
    CHECK(state.values("judge_name")[1].value == "Judge B");

    ChecklistPatch replace;
    replace.mode = PatchMode::Update;
    replace.changes.push_back({"judge_name", {ev("Judge C")}});
    state = apply_patch(schema(), state, replace);
    REQUIRE(state.values("judge_name").size() == 1);
    CHECK(state.values("judge_name")[0].value == "Judge C");
}

TEST_CASE("patch violations leave the input state untouched") {
    ChecklistState state;
    ChecklistPatch seed;
    seed.changes.push_back({"filing_date", {ev("2025-01-05")}});
    state = apply_patch(schema(), state, seed);

    ChecklistPatch unknown;
    unknown.changes.push_back({"not_an_item", {ev("x")}});
    CHECK_THROWS_AS(apply_patch(schema(), state, unknown), SchemaViolation);

    ChecklistPatch dup;
    dup.changes.push_back({"judge_name", {ev("A")}});
    dup.changes.push_back({"judge_name", {ev("B")}});
    CHECK_THROWS_AS(apply_patch(schema(), state, dup), ProtocolViolation);

    ChecklistPatch no_evidence;
    ExtractedValue bare;
    bare.value = "2025-01-05";
    no_evidence.changes.push_back({"filing_date", {bare}});
    CHECK_THROWS_AS(apply_patch(schema(), state, no_evidence), ProtocolViolation);

    ChecklistPatch na_append;
    na_append.changes.push_back({"trials", {ev(std::string(kNotApplicable))}});
    CHECK_THROWS_AS(apply_patch(schema(), state, na_append), ProtocolViolation);

    ChecklistPatch empty_update;
    empty_update.mode = PatchMode::Update;
    empty_update.changes.push_back({"filing_date", {}});
    CHECK_THROWS_AS(apply_patch(schema(), state, empty_update), ProtocolViolation);

    // None of the rejected patches altered the state.
    CHECK(state.values("filing_date").size() == 1);
    CHECK(state.values("judge_name").empty());
}

TEST_CASE("not-applicable needs exactly one sentinel entry, set via update") {
    ChecklistState state;
    CHECK(item_status(schema(), state, "trials") == ItemStatus::Empty);

    ChecklistPatch na;
    na.mode = PatchMode::Update;
    na.changes.push_back({"trials", {ev(std::string(kNotApplicable))}});
    state = apply_patch(schema(), state, na);
    CHECK(item_status(schema(), state, "trials") == ItemStatus::NotApplicable);

    // The sentinel mixed with a real value reads as filled, not NA.
    ChecklistPatch mixed;
    mixed.mode = PatchMode::Update;
    mixed.changes.push_back({"trials", {ev(std::string(kNotApplicable)), ev("2025-01-05")}});
    state = apply_patch(schema(), state, mixed);
    CHECK(item_status(schema(), state, "trials") == ItemStatus::Filled);

    CHECK_THROWS_AS(item_status(schema(), state, "bogus"), SchemaViolation);
}

TEST_CASE("state json round-trips and checks the schema version") {
    ChecklistState state;
    ChecklistPatch p;
    p.changes.push_back({"filing_date", {ev("2025-01-05", "Filed: January 5, 2025")}});
    p.changes.push_back({"judge_name", {ev("Judge A"), ev("Judge B")}});
    state = apply_patch(schema(), state, p);

    auto j = state_to_json(state, schema().version());
    auto back = state_from_json(schema(), j);
    CHECK(back == state);

    auto stale = j;
    stale["schema_version"] = "someone_elses_schema";
    CHECK_THROWS_AS(state_from_json(schema(), stale), ParseError);

    auto foreign = j;
    foreign["items"]["mystery_item"] = {{"extracted", nlohmann::json::array()}};
    CHECK_THROWS_AS(state_from_json(schema(), foreign), SchemaViolation);
}
