// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "lexeval/doc_extract.hpp"
#include "lexeval/errors.hpp"

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

CaseCorpus planted_corpus() {
    Tokenizer tok;
    std::vector<CaseDocument> docs;
    docs.push_back(make_document(tok, "complaint.txt", "complaint", 1,
                                 "Filed: January 5, 2021. Complaint by United Farm Workers "
                                 "against Agro Corp. Filed: in the Northern District."));
    docs.push_back(make_document(tok, "order.txt", "order", 2,
                                 "Order. The court granted summary judgment for the "
                                 "plaintiffs. Filed: March 2, 2022. Filed: as docket 44."));
    docs.push_back(make_document(tok, "decree.txt", "decree", 3,
                                 "Consent decree entered. Filed: June 9, 2023. Monitoring "
                                 "shall continue for three years."));
    return make_corpus("planted-case", std::move(docs));
}

CaseCorpus word_corpus(std::size_t words, const std::string& name = "big.txt") {
    Tokenizer tok;
    std::string text;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) text += ' ';
        text += "w" + std::to_string(i);
    }
    std::vector<CaseDocument> docs;
    docs.push_back(make_document(tok, name, "other", 1, std::move(text)));
    return make_corpus("word-case", std::move(docs));
}

std::vector<std::string> all_item_ids() {
    std::vector<std::string> ids;
    for (const auto& def : schema().items()) ids.push_back(def.item_id);
    return ids;
}

struct AgentRig {
    std::shared_ptr<MockBackend> mock;
    std::unique_ptr<ModelGateway> gateway;

    explicit AgentRig(const nlohmann::json& script) {
        Tokenizer tok;
        mock = std::make_shared<MockBackend>(script, tok);
        gateway = std::make_unique<ModelGateway>(mock, tok);
        gateway->set_sleep_hook([](std::chrono::milliseconds) {});
    }
};

std::string tool_reply(const std::string& name, nlohmann::json args) {
    return nlohmann::json{{"name", name}, {"args", std::move(args)}}.dump();
}

std::string stop_reply(const std::string& reason) {
    return nlohmann::json{{"decision", "stop"}, {"reason", reason}}.dump();
}

nlohmann::json value_json(const std::string& value, const std::string& text,
                          const std::string& source, const std::string& location) {
    return nlohmann::json{
        {"value", value},
        {"evidence",
         {{{"text", text}, {"source_document", source}, {"location", location}}}}};
}

nlohmann::json seq_script(std::vector<std::string> replies) {
    nlohmann::json list = nlohmann::json::array();
    for (auto& r : replies) list.push_back(std::move(r));
    return nlohmann::json{
        {"rules",
         {{{"name", "policy"}, {"match", nlohmann::json::object()}, {"replies", list}}}}};
}

nlohmann::json keyed_rule(const std::string& name, std::vector<std::string> user_contains,
                          const std::string& reply) {
    return nlohmann::json{{"name", name},
                          {"match", {{"user_contains", std::move(user_contains)}}},
                          {"reply", reply}};
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++count;
    return count;
}

ToolCall synthetic_call(std::size_t step) {
    ToolCall call;
    call.name = "list_documents";
    call.args = nlohmann::json::object();
    call.response = nlohmann::json{{"documents", nlohmann::json::array()}};
    call.outcome_summary = "listed 0 documents";
    call.step_index = step;
    return call;
}

} // namespace

TEST_SUITE("agent_tools") {

TEST_CASE("list_documents returns the catalog in filing order") {
    auto corpus = planted_corpus();
    auto payload = tool_list_documents(corpus);
    REQUIRE(payload["documents"].size() == 3);
    CHECK(payload["documents"][0]["name"] == "complaint.txt");
    CHECK(payload["documents"][0]["doc_type"] == "complaint");
    CHECK(payload["documents"][0]["filing_order"] == 1);
    CHECK(payload["documents"][2]["name"] == "decree.txt");
    std::size_t total = 0;
    for (const auto& d : payload["documents"]) total += d["token_count"].get<std::size_t>();
    CHECK(total == corpus.total_tokens);

    CaseCorpus empty = make_corpus("empty", {});
    CHECK(tool_list_documents(empty)["documents"].empty());
}

TEST_CASE("read_document returns exactly the requested window") {
    auto corpus = word_corpus(500);
    AgentTrace trace;
    auto payload = tool_read_document(corpus, "big.txt", 0, 100, &trace);
    REQUIRE(!is_tool_error(payload));
    CHECK(payload["token_count"] == 100);
    CHECK(payload["end_token"] == 100);
    CHECK(payload["text"] == token_range_text(corpus.documents[0], 0, 100));
    CHECK(!payload.contains("notice"));

    auto rest = tool_read_document(corpus, "big.txt", 100, 500, &trace);
    CHECK(payload["text"].get<std::string>() + rest["text"].get<std::string>() ==
          corpus.documents[0].text);
    REQUIRE(trace.viewed_ranges.at("big.txt").size() == 1);
    CHECK(trace.viewed_ranges.at("big.txt")[0] == TokenRange{0, 500});
    CHECK(trace.fully_visited(corpus.documents[0]));
}

TEST_CASE("read_document clips a 12,000-token request to the cap") {
    auto corpus = word_corpus(12000);
    AgentTrace trace;
    auto payload = tool_read_document(corpus, "big.txt", 0, 12000, &trace);
    REQUIRE(!is_tool_error(payload));
    CHECK(payload["token_count"] == 10000);
    CHECK(payload["end_token"] == 10000);
    CHECK(payload["notice"].get<std::string>().find("10000") != std::string::npos);
    CHECK(trace.viewed_ranges.at("big.txt")[0] == TokenRange{0, 10000});
}

TEST_CASE("read_document past the end returns an empty window with a notice") {
    auto corpus = word_corpus(500);
    AgentTrace trace;
    auto payload = tool_read_document(corpus, "big.txt", 600, 700, &trace);
    REQUIRE(!is_tool_error(payload));
    CHECK(payload["token_count"] == 0);
    CHECK(payload["text"] == "");
    CHECK(payload["notice"].get<std::string>().find("past the end") != std::string::npos);
    CHECK(trace.viewed_ranges.empty());
}

TEST_CASE("read_document rejects unknown documents and empty windows as payloads") {
    auto corpus = word_corpus(10);
    auto unknown = tool_read_document(corpus, "missing.txt", 0, 5);
    REQUIRE(is_tool_error(unknown));
    CHECK(unknown["error"].get<std::string>().find("missing.txt") != std::string::npos);
    CHECK(is_tool_error(tool_read_document(corpus, "big.txt", 5, 5)));
}

TEST_CASE("viewed ranges merge and only grow") {
    AgentTrace trace;
    trace.record_view("a.txt", 0, 100);
    trace.record_view("a.txt", 200, 300);
    REQUIRE(trace.viewed_ranges["a.txt"].size() == 2);
    trace.record_view("a.txt", 50, 220);
    REQUIRE(trace.viewed_ranges["a.txt"].size() == 1);
    CHECK(trace.viewed_ranges["a.txt"][0] == TokenRange{0, 300});
    CHECK(trace.covered_tokens("a.txt") == 300);
    trace.record_view("a.txt", 10, 20); // already covered
    CHECK(trace.covered_tokens("a.txt") == 300);
}

TEST_CASE("search matches come in filing order truncated to top_k") {
    auto corpus = planted_corpus();
    AgentTrace trace;
    auto payload =
        tool_search_document_regex(corpus, "Filed:", {}, 3, 100, &trace);
    REQUIRE(!is_tool_error(payload));
    CHECK(payload["total_matches"] == 5);
    REQUIRE(payload["matches"].size() == 3);
    CHECK(payload["matches"][0]["document"] == "complaint.txt");
    CHECK(payload["matches"][1]["document"] == "complaint.txt");
    CHECK(payload["matches"][2]["document"] == "order.txt");
    CHECK(payload["matches"][0]["match_begin_token"].get<std::size_t>() <
          payload["matches"][1]["match_begin_token"].get<std::size_t>());
    CHECK(payload["notice"].get<std::string>().find("first 3") != std::string::npos);
    CHECK(!trace.viewed_ranges.empty());
}

TEST_CASE("search maps byte positions to token indices") {
    Tokenizer tok;
    auto corpus = make_corpus(
        "tiny", {make_document(tok, "t.txt", "other", 1, "alpha beta gamma Filed: now")});
    auto payload = tool_search_document_regex(corpus, "Filed:", {}, 5, 100);
    REQUIRE(payload["matches"].size() == 1);
    const auto& m = payload["matches"][0];
    CHECK(m["match_text"] == "Filed:");
    CHECK(m["match_begin_token"] == 3);
    CHECK(m["match_end_token"] == 5);
    CHECK(m["context_begin_token"] == 0);
    CHECK(m["context_end_token"] == 6); // clipped at the 6-token document bound
    CHECK(m["context_text"] == corpus.documents[0].text);
}

TEST_CASE("search scope, pattern, and bounds errors are payloads") {
    auto corpus = planted_corpus();
    CHECK(tool_search_document_regex(corpus, "Filed:", {}, 5, 100)["total_matches"] == 5);
    CHECK(tool_search_document_regex(corpus, "zz9qq", {}, 5, 100)["matches"].empty());

    auto scoped = tool_search_document_regex(corpus, "Filed:", {"order.txt"}, 10, 100);
    CHECK(scoped["total_matches"] == 2);

    auto bad_doc = tool_search_document_regex(corpus, "Filed:", {"nope.txt"}, 5, 100);
    REQUIRE(is_tool_error(bad_doc));

    auto bad_pattern = tool_search_document_regex(corpus, "(", {}, 5, 100);
    REQUIRE(is_tool_error(bad_pattern));
    CHECK(bad_pattern["error"].get<std::string>().find("regex error") != std::string::npos);

    CHECK(is_tool_error(tool_search_document_regex(corpus, "Filed:", {}, 5, 50)));
    CHECK(is_tool_error(tool_search_document_regex(corpus, "Filed:", {}, 5, 1001)));
    CHECK(is_tool_error(tool_search_document_regex(corpus, "Filed:", {}, 0, 100)));
    CHECK(!is_tool_error(tool_search_document_regex(corpus, "Filed:", {}, 5, 1000)));
}

TEST_CASE("get_checklist returns values verbatim and rejects unknown or foreign ids") {
    ChecklistState state;
    ExtractedValue v;
    v.value = "January 5, 2021";
    v.evidence.push_back({"Filed: January 5, 2021", "complaint.txt", "line 1"});
    state.set("filing_date", {v});

    std::vector<std::string> scope{"filing_date", "parties"};
    auto payload = tool_get_checklist(schema(), state, scope, {"filing_date", "parties"});
    REQUIRE(!is_tool_error(payload));
    CHECK(payload["items"]["filing_date"][0]["value"] == "January 5, 2021");
    CHECK(payload["items"]["parties"].empty());

    CHECK(is_tool_error(tool_get_checklist(schema(), state, scope, {"no_such_item"})));
    auto foreign = tool_get_checklist(schema(), state, scope, {"trials"});
    REQUIRE(is_tool_error(foreign));
    CHECK(foreign["error"].get<std::string>().find("out of scope") != std::string::npos);
    CHECK(is_tool_error(tool_get_checklist(schema(), state, scope, {})));
}

TEST_CASE("append and update delegate to the patch protocol") {
    ChecklistState state;
    std::vector<std::string> scope = all_item_ids();

    nlohmann::json changes{
        {"filing_date",
         {value_json("January 5, 2021", "Filed: January 5, 2021", "complaint.txt", "l. 1"),
          value_json("amended March 2021", "amended on March 1, 2021", "complaint.txt",
                     "l. 9")}}};
    auto ok = tool_append_checklist(schema(), state, scope, changes);
    REQUIRE(!is_tool_error(ok));
    CHECK(ok["result"] == "appended 2 values to filing_date");
    CHECK(state.values("filing_date").size() == 2);
    CHECK(state.values("filing_date")[0].evidence[0].source == "complaint.txt");

    nlohmann::json na_append{{"trials", {value_json("Not Applicable", "no trial was held",
                                                    "order.txt", "p. 2")}}};
    auto rejected = tool_append_checklist(schema(), state, scope, na_append);
    REQUIRE(is_tool_error(rejected));
    CHECK(!state.has("trials"));

    auto na_update = tool_update_checklist(schema(), state, scope, na_append);
    REQUIRE(!is_tool_error(na_update));
    CHECK(item_status(schema(), state, "trials") == ItemStatus::NotApplicable);

    nlohmann::json empty_update{{"trials", nlohmann::json::array()}};
    CHECK(is_tool_error(tool_update_checklist(schema(), state, scope, empty_update)));

    nlohmann::json no_evidence{{"parties", {{{"value", "United Farm Workers"}}}}};
    CHECK(is_tool_error(tool_append_checklist(schema(), state, scope, no_evidence)));

    nlohmann::json foreign{{"parties", {value_json("x", "x", "d.txt", "")}}};
    auto scoped = tool_append_checklist(schema(), state, {"filing_date"}, foreign);
    REQUIRE(is_tool_error(scoped));
    CHECK(scoped["error"].get<std::string>().find("out of scope") != std::string::npos);

    CHECK(is_tool_error(
        tool_append_checklist(schema(), state, scope, nlohmann::json::object())));
}

} // TEST_SUITE agent_tools

TEST_SUITE("agent_snapshot") {

TEST_CASE("fresh snapshot renders task, definitions, catalog, summary, history") {
    auto corpus = planted_corpus();
    ChecklistState state;
    AgentTrace trace;
    auto snap = build_snapshot(prompts(), schema(), {"filing_date", "parties"}, corpus, state,
                               trace);

    CHECK(snap.system_text.find("{{TOOL_DESCRIPTIONS}}") == std::string::npos);
    CHECK(snap.system_text.find("# Tools") != std::string::npos);
    CHECK(snap.system_text.find("search_document_regex") != std::string::npos);

    CHECK(snap.user_text.find("# Task") != std::string::npos);
    CHECK(snap.user_text.find("1. Filing Date:") != std::string::npos);
    CHECK(snap.user_text.find("2. Parties:") != std::string::npos);
    CHECK(snap.user_text.find("Cause of Action") == std::string::npos);
    CHECK(count_occurrences(snap.user_text, "Basic Case Information") == 1);
    CHECK(snap.user_text.find("complaint.txt (type: complaint") != std::string::npos);
    CHECK(count_occurrences(snap.user_text, "Not Visited") == 3);
    CHECK(snap.user_text.find("- filing_date (Filing Date): empty") != std::string::npos);
    CHECK(snap.user_text.find("(no actions yet)") != std::string::npos);
    CHECK(snap.hash().size() == 16);
}

TEST_CASE("catalog shows fully and partially visited documents with viewed ranges") {
    auto corpus = planted_corpus();
    ChecklistState state;
    AgentTrace trace;
    trace.record_view("complaint.txt", 0, corpus.documents[0].token_count);
    trace.record_view("order.txt", 2, 7);
    trace.record_view("order.txt", 10, 13);

    auto snap =
        build_snapshot(prompts(), schema(), {"filing_date"}, corpus, state, trace);
    CHECK(snap.user_text.find("complaint.txt (type: complaint, " +
                              std::to_string(corpus.documents[0].token_count) +
                              " tokens, filing order 1) - Fully Visited") !=
          std::string::npos);
    CHECK(snap.user_text.find("Partially Visited\n   Viewed tokens: 2-6, 10-12") !=
          std::string::npos);
    CHECK(count_occurrences(snap.user_text, "Not Visited") == 1);
}

TEST_CASE("checklist summary reflects filled and not-applicable items") {
    auto corpus = planted_corpus();
    ChecklistState state;
    ExtractedValue v;
    v.value = "January 5, 2021";
    v.evidence.push_back({"Filed: January 5, 2021", "complaint.txt", ""});
    state.set("filing_date", {v});
    ExtractedValue na;
    na.value = std::string(kNotApplicable);
    na.evidence.push_back({"no trial was held", "order.txt", ""});
    state.set("trials", {na});

    AgentTrace trace;
    auto snap = build_snapshot(prompts(), schema(), {"filing_date", "trials", "parties"},
                               corpus, state, trace);
    CHECK(snap.user_text.find("- filing_date (Filing Date): filled, 1 value") !=
          std::string::npos);
    CHECK(snap.user_text.find("- trials (Trials): Not Applicable") != std::string::npos);
    CHECK(snap.user_text.find("- parties (Parties): empty") != std::string::npos);
}

TEST_CASE("history window keeps at most 100 entries with the newest 5 in full") {
    auto corpus = planted_corpus();
    ChecklistState state;

    AgentTrace trace;
    for (std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{7}}) {
        trace.calls.clear();
        for (std::size_t i = 0; i < n; ++i) trace.calls.push_back(synthetic_call(i));
        auto snap =
            build_snapshot(prompts(), schema(), {"filing_date"}, corpus, state, trace);
        auto history = snap.user_text.substr(snap.user_text.find("# Recent Actions"));
        CHECK(count_occurrences(history, "step ") == n);
        CHECK(count_occurrences(history, "  response: ") == std::min<std::size_t>(n, 5));
    }

    trace.calls.clear();
    for (std::size_t i = 0; i < 130; ++i) trace.calls.push_back(synthetic_call(i));
    auto snap = build_snapshot(prompts(), schema(), {"filing_date"}, corpus, state, trace);
    auto history = snap.user_text.substr(snap.user_text.find("# Recent Actions"));
    CHECK(count_occurrences(history, "step ") == 100);
    CHECK(count_occurrences(history, "  response: ") == 5);
    CHECK(history.find("step 29:") == std::string::npos);
    CHECK(history.find("step 30: list_documents -> listed 0 documents") != std::string::npos);
    CHECK(history.find("step 124: list_documents -> listed 0 documents") !=
          std::string::npos);
    CHECK(history.find("step 125: list_documents {}") != std::string::npos);
    CHECK(history.find("step 129: list_documents {}") != std::string::npos);
}

} // TEST_SUITE agent_snapshot

TEST_SUITE("agent_loop") {

TEST_CASE("scripted policy recovers the planted ground truth and stops") {
    auto corpus = planted_corpus();
    nlohmann::json filing_value = value_json("January 5, 2021", "Filed: January 5, 2021",
                                             "complaint.txt", "line 1");
    nlohmann::json ruling_value =
        value_json("The court granted summary judgment for the plaintiffs.",
                   "The court granted summary judgment for the plaintiffs.", "order.txt",
                   "p. 1");
    AgentRig rig(seq_script(
        {tool_reply("list_documents", nlohmann::json::object()),
         tool_reply("search_document_regex",
                    {{"pattern", "Filed:"}, {"context_tokens", 100}, {"top_k", 2}}),
         tool_reply("read_document", {{"document_name", "complaint.txt"},
                                      {"start_token", 0},
                                      {"end_token", 200}}),
         tool_reply("append_checklist",
                    {{"changes", {{"filing_date", {filing_value}}}}}),
         tool_reply("update_checklist",
                    {{"changes", {{"court_rulings", {ruling_value}}}}}),
         stop_reply("all items extracted")}));

    AgentConfig config;
    auto result = run_agent(*rig.gateway, prompts(), schema(),
                            {"filing_date", "court_rulings"}, corpus, config, "agent:test");

    CHECK(result.trace.terminal == "stop");
    CHECK(result.trace.stop_reason == "all items extracted");
    REQUIRE(result.trace.calls.size() == 5);
    CHECK(result.trace.calls[0].name == "list_documents");
    CHECK(result.trace.calls[1].name == "search_document_regex");
    CHECK(result.trace.calls[2].name == "read_document");
    CHECK(result.trace.calls[3].name == "append_checklist");
    CHECK(result.trace.calls[4].name == "update_checklist");
    for (std::size_t i = 0; i < result.trace.calls.size(); ++i) {
        CHECK(result.trace.calls[i].step_index == i);
        CHECK(!is_tool_error(result.trace.calls[i].response));
    }

    ChecklistState expected;
    ExtractedValue filing;
    filing.value = "January 5, 2021";
    filing.evidence.push_back({"Filed: January 5, 2021", "complaint.txt", "line 1"});
    expected.set("filing_date", {filing});
    ExtractedValue ruling;
    ruling.value = "The court granted summary judgment for the plaintiffs.";
    ruling.evidence.push_back(
        {"The court granted summary judgment for the plaintiffs.", "order.txt", "p. 1"});
    expected.set("court_rulings", {ruling});
    CHECK(result.state == expected);

    // the read covered the whole first document, so it is fully visited
    CHECK(result.trace.fully_visited(corpus.documents[0]));

    REQUIRE(result.trace.log.size() == 6);
    CHECK(result.trace.log[5].action["decision"] == "stop");
    for (std::size_t i = 0; i < result.trace.log.size(); ++i) {
        CHECK(result.trace.log[i].step_index == i);
        CHECK(result.trace.log[i].snapshot_hash.size() == 16);
        CHECK(result.trace.log[i].response_hash.size() == 16);
    }

    auto totals = rig.gateway->ledger().for_label("agent:test");
    CHECK(totals.calls == 6);
    CHECK(totals.input_tokens == result.trace.usage.input_tokens);
    CHECK(totals.output_tokens == result.trace.usage.output_tokens);

    // history law holds for every prefix of the finished trace
    for (std::size_t k = 0; k <= result.trace.calls.size(); ++k) {
        AgentTrace prefix;
        prefix.calls.assign(result.trace.calls.begin(), result.trace.calls.begin() + k);
        auto snap = build_snapshot(prompts(), schema(), {"filing_date", "court_rulings"},
                                   corpus, result.state, prefix);
        auto history = snap.user_text.substr(snap.user_text.find("# Recent Actions"));
        if (k == 0) {
            CHECK(history.find("(no actions yet)") != std::string::npos);
        } else {
            CHECK(count_occurrences(history, "step ") == std::min<std::size_t>(k, 100));
            CHECK(count_occurrences(history, "  response: ") ==
                  std::min<std::size_t>(k, 5));
        }
    }
}

TEST_CASE("a policy that never stops exhausts the step budget exactly") {
    auto corpus = planted_corpus();
    nlohmann::json script{
        {"rules",
         {{{"name", "loop"},
           {"match", nlohmann::json::object()},
           {"reply", tool_reply("list_documents", nlohmann::json::object())}}}}};
    AgentRig rig(script);
    AgentConfig config;
    config.step_budget = 7;
    auto result = run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                            config, "agent:loop");
    CHECK(result.trace.terminal == "step-budget-exhausted");
    CHECK(result.trace.calls.size() == 7);
    CHECK(result.trace.log.size() == 7);
    CHECK(result.trace.calls.back().step_index == 6);
    CHECK(rig.gateway->ledger().for_label("agent:loop").calls == 7);
}

TEST_CASE("stop as the first action leaves the state empty") {
    auto corpus = planted_corpus();
    AgentRig rig(seq_script({stop_reply("nothing to extract")}));
    auto result = run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                            AgentConfig{}, "agent:first-stop");
    CHECK(result.trace.terminal == "stop");
    CHECK(result.trace.calls.empty());
    CHECK(result.trace.log.size() == 1);
    CHECK(result.state.entries().empty());
}

TEST_CASE("an unparseable action consumes a step and returns a format error") {
    auto corpus = planted_corpus();
    AgentRig rig(seq_script({"Let me take stock of the documents first.",
                             tool_reply("list_documents", nlohmann::json::object()),
                             stop_reply("done")}));
    auto result = run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                            AgentConfig{}, "agent:fmt");
    CHECK(result.trace.terminal == "stop");
    REQUIRE(result.trace.calls.size() == 2);
    CHECK(result.trace.calls[0].name == "invalid_action");
    CHECK(result.trace.calls[0].step_index == 0);
    REQUIRE(is_tool_error(result.trace.calls[0].response));
    CHECK(result.trace.calls[0].response["error"].get<std::string>().find("invalid action") !=
          std::string::npos);
    CHECK(result.trace.log[0].action.contains("format_error"));
    CHECK(result.trace.calls[1].name == "list_documents");
    CHECK(result.trace.calls[1].step_index == 1);
}

TEST_CASE("tool errors flow back as payloads and the loop continues") {
    auto corpus = planted_corpus();
    AgentRig rig(seq_script({tool_reply("read_document", {{"document_name", "missing.txt"},
                                                          {"start_token", 0},
                                                          {"end_token", 10}}),
                             tool_reply("read_document", {{"document_name", "complaint.txt"}}),
                             tool_reply("frobnicate", nlohmann::json::object()),
                             stop_reply("done")}));
    auto result = run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                            AgentConfig{}, "agent:errs");
    CHECK(result.trace.terminal == "stop");
    REQUIRE(result.trace.calls.size() == 3);
    CHECK(result.trace.calls[0].response["error"].get<std::string>().find("missing.txt") !=
          std::string::npos);
    CHECK(result.trace.calls[1].response["error"].get<std::string>().find("start_token") !=
          std::string::npos);
    CHECK(result.trace.calls[2].response["error"].get<std::string>().find("unknown tool") !=
          std::string::npos);
    CHECK(result.trace.calls[2].outcome_summary.find("frobnicate") != std::string::npos);
}

TEST_CASE("a backend outage aborts with partial state and terminal error") {
    auto corpus = planted_corpus();
    nlohmann::json filing_value = value_json("January 5, 2021", "Filed: January 5, 2021",
                                             "complaint.txt", "line 1");
    nlohmann::json script{
        {"rules",
         {keyed_rule("first-turn", {"(no actions yet)"},
                     tool_reply("append_checklist",
                                {{"changes", {{"filing_date", {filing_value}}}}})),
          {{"name", "outage"},
           {"match", nlohmann::json::object()},
           {"reply", stop_reply("never reached")},
           {"fail_times", 100}}}}};
    AgentRig rig(script);
    auto result = run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                            AgentConfig{}, "agent:outage");
    CHECK(result.trace.terminal == "error");
    CHECK(result.trace.error_message.find("failed after 4 attempts") != std::string::npos);
    REQUIRE(result.trace.calls.size() == 1);
    CHECK(result.state.has("filing_date"));
    CHECK(result.state.values("filing_date")[0].value == "January 5, 2021");
}

TEST_CASE("config validation rejects degenerate budgets and scopes") {
    auto corpus = planted_corpus();
    AgentRig rig(seq_script({stop_reply("x")}));
    AgentConfig config;
    config.step_budget = 0;
    CHECK_THROWS_AS(run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                              config, "agent:x"),
                    ConfigError);
    config.step_budget = 10;
    config.search_context_tokens = 50;
    CHECK_THROWS_AS(run_agent(*rig.gateway, prompts(), schema(), {"filing_date"}, corpus,
                              config, "agent:x"),
                    ConfigError);
    config.search_context_tokens = 200;
    CHECK_THROWS_AS(run_agent(*rig.gateway, prompts(), schema(), {}, corpus, config,
                              "agent:x"),
                    ConfigError);
    CHECK_THROWS_AS(run_agent(*rig.gateway, prompts(), schema(),
                              {"filing_date", "filing_date"}, corpus, config, "agent:x"),
                    ConfigError);
    CHECK_THROWS_AS(run_agent(*rig.gateway, prompts(), schema(), {"no_such_item"}, corpus,
                              config, "agent:x"),
                    SchemaViolation);
}

TEST_CASE("agent mode names round-trip") {
    CHECK(to_string(agent_mode_from_string("one_agent_all")) == "one_agent_all");
    CHECK(to_string(agent_mode_from_string("nine_by_group")) == "nine_by_group");
    CHECK(to_string(agent_mode_from_string("twenty_six_individual")) ==
          "twenty_six_individual");
    CHECK_THROWS_AS(agent_mode_from_string("three_by_three"), ConfigError);
}

} // TEST_SUITE agent_loop

TEST_SUITE("agent_orchestration") {

TEST_CASE("one cell per mode partition, merged by disjoint keys") {
    auto corpus = planted_corpus();
    nlohmann::json filing_value = value_json("January 5, 2021", "Filed: January 5, 2021",
                                             "complaint.txt", "line 1");
    nlohmann::json script{
        {"rules",
         {keyed_rule("filing-first-turn", {"1. Filing Date:", "(no actions yet)"},
                     tool_reply("append_checklist",
                                {{"changes", {{"filing_date", {filing_value}}}}})),
          {{"name", "stop"},
           {"match", nlohmann::json::object()},
           {"reply", stop_reply("done")}}}}};

    AgentConfig config;
    config.mode = AgentMode::TwentySixIndividual;
    AgentRig rig(script);
    auto result = orchestrate_agents(*rig.gateway, prompts(), schema(), corpus, config);

    REQUIRE(result.traces.size() == 26);
    CHECK(result.traces[0].cell == "agent:item:filing_date");
    CHECK(result.item_errors.empty());
    REQUIRE(result.state.has("filing_date"));
    CHECK(result.state.values("filing_date")[0].value == "January 5, 2021");
    CHECK(result.state.entries().size() == 1);

    ModelUsage summed;
    std::set<std::string> seen_items;
    for (const auto& trace : result.traces) {
        summed.input_tokens += trace.usage.input_tokens;
        summed.output_tokens += trace.usage.output_tokens;
        for (const auto& id : trace.item_ids) CHECK(seen_items.insert(id).second);
    }
    CHECK(seen_items.size() == 26);
    CHECK(summed.input_tokens == result.usage.input_tokens);
    CHECK(summed.output_tokens == result.usage.output_tokens);
}

TEST_CASE("nine_by_group covers all items with nine cells") {
    auto corpus = planted_corpus();
    nlohmann::json script{{"rules",
                           {{{"name", "stop"},
                             {"match", nlohmann::json::object()},
                             {"reply", stop_reply("done")}}}}};
    AgentRig rig(script);
    AgentConfig config;
    config.mode = AgentMode::NineByGroup;
    auto result = orchestrate_agents(*rig.gateway, prompts(), schema(), corpus, config);
    REQUIRE(result.traces.size() == 9);
    CHECK(result.traces[0].cell == "agent:group:Basic Case Information");
    std::set<std::string> covered;
    for (const auto& trace : result.traces)
        for (const auto& id : trace.item_ids) covered.insert(id);
    CHECK(covered.size() == 26);
    CHECK(result.state.entries().empty());
}

TEST_CASE("one_agent_all runs a single cell over the whole schema") {
    auto corpus = planted_corpus();
    nlohmann::json script{{"rules",
                           {{{"name", "stop"},
                             {"match", nlohmann::json::object()},
                             {"reply", stop_reply("done")}}}}};
    AgentRig rig(script);
    AgentConfig config;
    config.mode = AgentMode::OneAgentAll;
    auto result = orchestrate_agents(*rig.gateway, prompts(), schema(), corpus, config);
    REQUIRE(result.traces.size() == 1);
    CHECK(result.traces[0].cell == "agent:all");
    CHECK(result.traces[0].item_ids.size() == 26);
    CHECK(result.traces[0].terminal == "stop");
}

TEST_CASE("an aborting cell flags only its own items") {
    auto corpus = planted_corpus();
    nlohmann::json script{
        {"rules",
         {{{"name", "filing-outage"},
           {"match", {{"user_contains", {"1. Filing Date:"}}}},
           {"reply", stop_reply("never sent")},
           {"fail_times", 1000}},
          {{"name", "stop"},
           {"match", nlohmann::json::object()},
           {"reply", stop_reply("done")}}}}};
    AgentRig rig(script);
    AgentConfig config;
    config.mode = AgentMode::TwentySixIndividual;
    auto result = orchestrate_agents(*rig.gateway, prompts(), schema(), corpus, config);

    REQUIRE(result.item_errors.size() == 1);
    CHECK(result.item_errors.count("filing_date") == 1);
    CHECK(result.traces[0].terminal == "error");
    for (std::size_t i = 1; i < result.traces.size(); ++i)
        CHECK(result.traces[i].terminal == "stop");
    CHECK(result.state.entries().empty());
}

} // TEST_SUITE agent_orchestration

TEST_SUITE("e2e_extraction") {

TEST_CASE("empty replies give an empty state with one call per item") {
    auto corpus = planted_corpus();
    AgentRig rig(nlohmann::json{
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}});
    auto outcome = extract_end_to_end(*rig.gateway, prompts(), schema(), corpus);
    CHECK(outcome.state.entries().empty());
    CHECK(outcome.notes.empty());
    CHECK(rig.gateway->ledger().total().calls == 26);
    CHECK(rig.gateway->ledger().for_label("e2e:filing_date").calls == 1);
}

TEST_CASE("valued items keep all sourced evidence") {
    auto corpus = planted_corpus();
    nlohmann::json reply{
        {"reasoning", "found the filing date"},
        {"extracted",
         {{{"value", "January 5, 2021"},
           {"evidence",
            {{{"text", "Filed: January 5, 2021"},
              {"source_document", "complaint.txt"},
              {"location", "line 1"}},
             {{"text", "Filed: March 2, 2022"},
              {"source_document", "order.txt"},
              {"location", "p. 2"}}}}}}}};
    nlohmann::json script{
        {"rules", {keyed_rule("filing", {"identify Filing Date:"}, reply.dump())}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig(script);
    auto outcome = extract_end_to_end(*rig.gateway, prompts(), schema(), corpus);
    REQUIRE(outcome.state.has("filing_date"));
    const auto& values = outcome.state.values("filing_date");
    REQUIRE(values.size() == 1);
    REQUIRE(values[0].evidence.size() == 2);
    CHECK(values[0].evidence[0].source == "complaint.txt");
    CHECK(values[0].evidence[1].source == "order.txt");
    CHECK(values[0].evidence[1].location == "p. 2");
    CHECK(outcome.state.entries().size() == 1);
}

TEST_CASE("evidence without a source document drops the value with a note") {
    auto corpus = planted_corpus();
    nlohmann::json reply{
        {"reasoning", "partial sourcing"},
        {"extracted",
         {{{"value", "United Farm Workers"},
           {"evidence",
            {{{"text", "Complaint by United Farm Workers"}}}}},
          {{"value", "Agro Corp"},
           {"evidence",
            {{{"text", "against Agro Corp"},
              {"source_document", "complaint.txt"},
              {"location", "l. 2"}}}}}}}};
    nlohmann::json script{
        {"rules", {keyed_rule("parties", {"identify Parties:"}, reply.dump())}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig(script);
    auto outcome = extract_end_to_end(*rig.gateway, prompts(), schema(), corpus);
    REQUIRE(outcome.state.has("parties"));
    REQUIRE(outcome.state.values("parties").size() == 1);
    CHECK(outcome.state.values("parties")[0].value == "Agro Corp");
    REQUIRE(outcome.notes.count("parties") == 1);
    CHECK(outcome.notes.at("parties")[0].find("source_document") != std::string::npos);
}

TEST_CASE("a reply that never parses leaves the item empty after the retry budget") {
    auto corpus = planted_corpus();
    nlohmann::json script{
        {"rules", {keyed_rule("trials", {"identify Trials:"}, "no structure here")}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig(script);
    auto outcome = extract_end_to_end(*rig.gateway, prompts(), schema(), corpus);
    CHECK(!outcome.state.has("trials"));
    REQUIRE(outcome.notes.count("trials") == 1);
    CHECK(outcome.notes.at("trials").size() == 4); // 3 failed attempts + final note
    CHECK(outcome.notes.at("trials").back().find("never parsed") != std::string::npos);
    CHECK(rig.gateway->ledger().for_label("e2e:trials").calls == 3);
}

TEST_CASE("results are identical across worker counts") {
    auto corpus = planted_corpus();
    nlohmann::json reply{{"reasoning", "r"},
                         {"extracted",
                          {{{"value", "January 5, 2021"},
                            {"evidence",
                             {{{"text", "Filed: January 5, 2021"},
                               {"source_document", "complaint.txt"},
                               {"location", "line 1"}}}}}}}};
    nlohmann::json script{
        {"rules", {keyed_rule("filing", {"identify Filing Date:"}, reply.dump())}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};

    AgentRig rig1(script);
    AgentRig rig4(script);
    auto one = extract_end_to_end(*rig1.gateway, prompts(), schema(), corpus, {}, 2, 1);
    auto four = extract_end_to_end(*rig4.gateway, prompts(), schema(), corpus, {}, 2, 4);
    CHECK(state_to_json(one.state, schema().version()).dump(2) ==
          state_to_json(four.state, schema().version()).dump(2));
    CHECK(one.notes == four.notes);
    CHECK(rig1.gateway->transcript_json().dump(2) == rig4.gateway->transcript_json().dump(2));
}

} // TEST_SUITE e2e_extraction

TEST_SUITE("chunked_extraction") {

TEST_CASE("a single small document makes exactly one chunk call per item") {
    auto corpus = word_corpus(10, "small.txt");
    AgentRig rig(nlohmann::json{
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}});
    auto outcome = extract_chunk_by_chunk(*rig.gateway, prompts(), schema(), corpus);
    CHECK(outcome.state.entries().empty());
    CHECK(rig.gateway->ledger().total().calls == 26);
    CHECK(rig.gateway->ledger().for_label("chunk:filing_date").calls == 1);
}

TEST_CASE("an echo-nothing model is a fixpoint") {
    auto corpus = word_corpus(12);
    AgentRig rig(nlohmann::json{
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}});
    auto outcome =
        extract_chunk_by_chunk(*rig.gateway, prompts(), schema(), corpus, 5);
    CHECK(outcome.state.entries().empty());
    // 12 tokens in 5-token chunks -> 3 chunks per item
    CHECK(rig.gateway->ledger().for_label("chunk:filing_date").calls == 3);
}

TEST_CASE("the parsed list replaces the item state at every chunk") {
    auto corpus = word_corpus(12);
    nlohmann::json planted{{"reasoning", "found"},
                           {"extracted",
                            {{{"value", "January 5, 2021"},
                              {"evidence",
                               {{{"text", "w5 w6"},
                                 {"source_document", "big.txt"},
                                 {"location", "Chunk 2/3"}}}}}}}};
    nlohmann::json script{
        {"rules",
         {keyed_rule("chunk2", {"identify Filing Date:", "Chunk: 2/3"}, planted.dump())}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig(script);
    auto outcome =
        extract_chunk_by_chunk(*rig.gateway, prompts(), schema(), corpus, 5);
    // chunk 3 answered with an empty list, wiping what chunk 2 added
    CHECK(!outcome.state.has("filing_date"));
}

TEST_CASE("a spurious early value persists when later chunks echo the state") {
    auto corpus = word_corpus(12);
    nlohmann::json spurious{{"reasoning", "misread"},
                            {"extracted",
                             {{{"value", "spurious date"},
                               {"evidence",
                                {{{"text", "w0 w1"},
                                  {"source_document", "big.txt"},
                                  {"location", "Chunk 1/3"}}}}}}}};
    nlohmann::json script{
        {"rules",
         {keyed_rule("inject", {"identify Filing Date:", "Chunk: 1/3"}, spurious.dump()),
          // matches only when the serialized current state carries the value,
          // proving the state threads into later chunk prompts
          keyed_rule("echo", {"identify Filing Date:", "\"value\": \"spurious date\""},
                     spurious.dump())}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig(script);
    auto outcome =
        extract_chunk_by_chunk(*rig.gateway, prompts(), schema(), corpus, 5);
    REQUIRE(outcome.state.has("filing_date"));
    REQUIRE(outcome.state.values("filing_date").size() == 1);
    CHECK(outcome.state.values("filing_date")[0].value == "spurious date");
}

TEST_CASE("a chunk that never parses carries the state forward") {
    auto corpus = word_corpus(8);
    nlohmann::json planted{{"reasoning", "found"},
                           {"extracted",
                            {{{"value", "January 5, 2021"},
                              {"evidence",
                               {{{"text", "w0 w1"},
                                 {"source_document", "big.txt"},
                                 {"location", "Chunk 1/2"}}}}}}}};
    nlohmann::json script{
        {"rules",
         {keyed_rule("chunk1", {"identify Filing Date:", "Chunk: 1/2"}, planted.dump()),
          keyed_rule("chunk2", {"identify Filing Date:", "Chunk: 2/2"}, "garbled &&&")}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig(script);
    auto outcome =
        extract_chunk_by_chunk(*rig.gateway, prompts(), schema(), corpus, 5);
    REQUIRE(outcome.state.has("filing_date"));
    CHECK(outcome.state.values("filing_date")[0].value == "January 5, 2021");
    REQUIRE(outcome.notes.count("filing_date") == 1);
    CHECK(outcome.notes.at("filing_date").back().find("carried forward") !=
          std::string::npos);
    // chunk 1 parsed on the first try; chunk 2 burned all three attempts
    CHECK(rig.gateway->ledger().for_label("chunk:filing_date").calls == 4);
}

TEST_CASE("chunk state serialization caps at the newest 50 values") {
    std::vector<ExtractedValue> values;
    for (int i = 1; i <= 55; ++i) {
        ExtractedValue v;
        v.value = "value-" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        v.evidence.push_back({"snippet", "doc.txt", ""});
        values.push_back(std::move(v));
    }
    std::string rendered = render_chunk_state(values);
    CHECK(rendered.find("(showing the newest 50 of 55 values)") != std::string::npos);
    CHECK(rendered.find("value-05") == std::string::npos);
    CHECK(rendered.find("value-06") != std::string::npos);
    CHECK(rendered.find("value-55") != std::string::npos);

    CHECK(render_chunk_state({}) == "[]");
    values.resize(50);
    CHECK(render_chunk_state(values).find("showing") == std::string::npos);
}

TEST_CASE("chunked results are identical across worker counts") {
    auto corpus = word_corpus(12);
    nlohmann::json planted{{"reasoning", "found"},
                           {"extracted",
                            {{{"value", "spurious date"},
                              {"evidence",
                               {{{"text", "w0 w1"},
                                 {"source_document", "big.txt"},
                                 {"location", "Chunk 1/3"}}}}}}}};
    nlohmann::json script{
        {"rules",
         {keyed_rule("inject", {"identify Filing Date:", "Chunk: 1/3"}, planted.dump()),
          keyed_rule("echo", {"identify Filing Date:", "\"value\": \"spurious date\""},
                     planted.dump())}},
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}};
    AgentRig rig1(script);
    AgentRig rig4(script);
    auto one = extract_chunk_by_chunk(*rig1.gateway, prompts(), schema(), corpus, 5, {}, 2, 1);
    auto four = extract_chunk_by_chunk(*rig4.gateway, prompts(), schema(), corpus, 5, {}, 2, 4);
    CHECK(state_to_json(one.state, schema().version()).dump(2) ==
          state_to_json(four.state, schema().version()).dump(2));
    CHECK(one.notes == four.notes);
    CHECK(rig1.gateway->transcript_json().dump(2) == rig4.gateway->transcript_json().dump(2));
}

TEST_CASE("chunk_size zero is rejected") {
    auto corpus = word_corpus(4);
    AgentRig rig(nlohmann::json{
        {"default_reply", R"({"reasoning": "nothing", "extracted": []})"}});
    CHECK_THROWS_AS(
        extract_chunk_by_chunk(*rig.gateway, prompts(), schema(), corpus, 0),
        InvalidArgument);
}

} // TEST_SUITE chunked_extraction
