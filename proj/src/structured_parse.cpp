// SPDX-License-Identifier: Apache-2.0
#include "lexeval/structured_parse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "lexeval/errors.hpp"

namespace lexeval {

namespace {

// Extracts the balanced JSON value starting at text[from] (which must be '{'
// or '['), honoring string literals and escapes. Returns one past the end, or
// npos when the braces never balance.
std::size_t balanced_end(const std::string& text, std::size_t from) {
    char open = text[from];
    char close = open == '{' ? '}' : ']';
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = from; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == open) {
            ++depth;
        } else if (c == close) {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string::npos;
}

std::string require_string(const nlohmann::json& j, const char* what) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number() || j.is_boolean()) return j.dump();
    throw ParseError(std::string("expected a string for ") + what);
}

// 1-based index within [1, size], else nullopt.
std::optional<std::size_t> checked_index(const nlohmann::json& j, std::size_t size) {
    if (!j.is_number_integer()) return std::nullopt;
    auto v = j.get<long long>();
    if (v < 1 || static_cast<std::size_t>(v) > size) return std::nullopt;
    return static_cast<std::size_t>(v) - 1;
}

} // namespace

std::optional<nlohmann::json> first_json_block(
    const std::string& text, const std::function<bool(const nlohmann::json&)>& accept) {
    std::size_t i = 0;
    while (i < text.size()) {
        i = text.find_first_of("{[", i);
        if (i == std::string::npos) break;
        std::size_t end = balanced_end(text, i);
        if (end != std::string::npos) {
            auto parsed = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
            if (!parsed.is_discarded() && (!accept || accept(parsed))) return parsed;
        }
        ++i; // step inside: the block may wrap a smaller valid one
    }
    return std::nullopt;
}

ParsedExtraction parse_extraction(const std::string& reply, EvidenceShape shape) {
    ParsedExtraction out;
    bool entry_error = false;
    auto accept = [&](const nlohmann::json& j) {
        return j.is_object() && j.contains("extracted") && j["extracted"].is_array();
    };
    auto block = first_json_block(reply, accept);
    if (!block) throw ParseError("reply has no extraction block");

    out.reasoning = block->value("reasoning", std::string());
    for (const auto& entry : (*block)["extracted"]) {
        if (!entry.is_object() || !entry.contains("value")) {
            entry_error = true;
            break;
        }
        ExtractedValue value;
        value.value = require_string(entry["value"], "extracted value");
        const auto evidence = entry.value("evidence", nlohmann::json::array());
        if (!evidence.is_array()) {
            entry_error = true;
            break;
        }
        for (const auto& ev : evidence) {
            Evidence e;
            if (shape == EvidenceShape::Strings) {
                if (!ev.is_string()) {
                    entry_error = true;
                    break;
                }
                e.text = ev.get<std::string>();
                e.source = "summary";
            } else {
                if (!ev.is_object() || !ev.contains("text") || !ev["text"].is_string()) {
                    entry_error = true;
                    break;
                }
                e.text = ev["text"].get<std::string>();
                e.source = ev.value("source_document", std::string());
                e.location = ev.contains("location") && ev["location"].is_string()
                                 ? ev["location"].get<std::string>()
                                 : std::string();
            }
            value.evidence.push_back(std::move(e));
        }
        if (entry_error) break;
        out.extracted.push_back(std::move(value));
    }
    if (entry_error) throw ParseError("extraction block has a malformed entry");
    return out;
}

SingleRelation parse_single_compare(const std::string& reply) {
    static constexpr std::string_view kMarker = "Final Answer";
    auto marker = reply.rfind(kMarker);
    if (marker == std::string::npos) throw ParseError("reply has no final-answer line");
    std::string_view tail = std::string_view(reply).substr(marker + kMarker.size());

    struct Phrase {
        std::string_view text;
        SingleRelation relation;
    };
    // "A and B are different" before "A contains B": no overlap, order is moot,
    // but keep the longest-first habit for future phrases.
    static constexpr Phrase kPhrases[] = {
        {"A and B are different", SingleRelation::Different},
        {"A contains B", SingleRelation::AContainsB},
        {"B contains A", SingleRelation::BContainsA},
        {"A equals B", SingleRelation::Equal},
    };
    std::size_t best_pos = std::string_view::npos;
    SingleRelation best{};
    for (const auto& p : kPhrases) {
        auto pos = tail.find(p.text);
        if (pos != std::string_view::npos && pos < best_pos) {
            best_pos = pos;
            best = p.relation;
        }
    }
    if (best_pos == std::string_view::npos)
        throw ParseError("final answer names none of the four relations");
    return best;
}

MultiCompareResult parse_multi_compare(const std::string& reply, std::size_t a_size,
                                       std::size_t b_size) {
    auto accept = [](const nlohmann::json& j) {
        return j.is_object() && j.contains("common") && j["common"].is_array();
    };
    auto block = first_json_block(reply, accept);
    if (!block) throw ParseError("reply has no list-comparison block");

    MultiCompareResult out;
    std::set<std::size_t> used_a, used_b;
    for (const auto& entry : (*block)["common"]) {
        if (!entry.is_object() || !entry.contains("A_index") || !entry.contains("B_index")) {
            ++out.dropped_entries;
            continue;
        }
        auto a = checked_index(entry["A_index"], a_size);
        auto b = checked_index(entry["B_index"], b_size);
        if (!a || !b || used_a.count(*a) || used_b.count(*b)) {
            ++out.dropped_entries;
            continue;
        }
        used_a.insert(*a);
        used_b.insert(*b);
        out.pairs.emplace_back(*a, *b);
    }
    return out;
}

ParsedResidualFacts parse_residual_facts(const std::string& reply, std::size_t span_count) {
    auto accept = [](const nlohmann::json& j) {
        return j.is_object() && j.contains("extracted") && j["extracted"].is_array();
    };
    auto block = first_json_block(reply, accept);
    if (!block) throw ParseError("reply has no residual-facts block");

    ParsedResidualFacts out;
    for (const auto& entry : (*block)["extracted"]) {
        if (!entry.is_object() || !entry.contains("fact"))
            throw ParseError("residual-facts block has a malformed entry");
        ResidualFact fact;
        fact.fact = require_string(entry["fact"], "fact");
        bool in_range = true;
        for (const auto& idx : entry.value("evidence_spans", nlohmann::json::array())) {
            auto i = checked_index(idx, span_count);
            if (!i) {
                in_range = false;
                break;
            }
            fact.evidence_spans.push_back(*i);
        }
        if (in_range)
            out.facts.push_back(std::move(fact));
        else
            ++out.dropped_facts;
    }
    return out;
}

ParsedStyle parse_style_scores(const std::string& reply) {
    auto accept = [](const nlohmann::json& j) {
        if (!j.is_object()) return false;
        return std::all_of(kStyleAspects.begin(), kStyleAspects.end(), [&](auto key) {
            auto it = j.find(key);
            return it != j.end() && it->is_number();
        });
    };
    auto block = first_json_block(reply, accept);
    if (!block) throw ParseError("reply has no five-aspect style block");

    ParsedStyle out;
    for (std::size_t i = 0; i < kStyleAspects.size(); ++i) {
        double raw = (*block)[std::string(kStyleAspects[i])].get<double>();
        int score = static_cast<int>(std::llround(raw));
        score = std::clamp(score, 1, 5);
        if (static_cast<double>(score) != raw) ++out.adjusted;
        out.scores[i] = score;
    }
    return out;
}

AgentAction parse_agent_action(const std::string& reply) {
    auto accept = [](const nlohmann::json& j) {
        if (!j.is_object()) return false;
        if (j.value("decision", std::string()) == "stop") return true;
        return j.contains("name") && j["name"].is_string() &&
               (!j.contains("args") || j["args"].is_object());
    };
    auto block = first_json_block(reply, accept);
    if (!block) throw ParseError("reply has neither a tool call nor a stop decision");

    AgentAction action;
    if (block->value("decision", std::string()) == "stop") {
        action.is_stop = true;
        action.stop_reason = block->value("reason", std::string());
    } else {
        action.tool = (*block)["name"].get<std::string>();
        action.args = block->value("args", nlohmann::json::object());
    }
    return action;
}

} // namespace lexeval
