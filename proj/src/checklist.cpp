// SPDX-License-Identifier: Apache-2.0
#include "lexeval/checklist.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

namespace {

Cardinality parse_cardinality(const std::string& s, const std::string& item_id) {
    if (s == "single") return Cardinality::Single;
    if (s == "multi") return Cardinality::Multi;
    throw SchemaViolation("item '" + item_id + "' has unknown cardinality '" + s + "'");
}

} // namespace

ChecklistSchema ChecklistSchema::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaViolation("schema file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

ChecklistSchema ChecklistSchema::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema_version") || !j.contains("items"))
        throw SchemaViolation("schema must be an object with schema_version and items");
    if (!j["schema_version"].is_string())
        throw SchemaViolation("schema_version must be a string");
    if (!j["items"].is_array() || j["items"].empty())
        throw SchemaViolation("items must be a nonempty array");

    ChecklistSchema schema;
    schema.version_ = j["schema_version"].get<std::string>();
    std::set<std::string> seen;
    for (const auto& item : j["items"]) {
        if (!item.is_object())
            throw SchemaViolation("each schema item must be an object");
        for (const char* key : {"item_id", "group", "display_name", "description", "cardinality"})
            if (!item.contains(key) || !item[key].is_string())
                throw SchemaViolation("schema item missing string field '" + std::string(key) + "'");
        ChecklistItemDef def;
        def.item_id = item["item_id"].get<std::string>();
        def.group = item["group"].get<std::string>();
        def.display_name = item["display_name"].get<std::string>();
        def.description = item["description"].get<std::string>();
        def.cardinality = parse_cardinality(item["cardinality"].get<std::string>(), def.item_id);
        if (def.item_id.empty())
            throw SchemaViolation("schema item has empty item_id");
        if (!seen.insert(def.item_id).second)
            throw SchemaViolation("duplicate item_id '" + def.item_id + "'");
        schema.items_.push_back(std::move(def));
    }
    return schema;
}

bool ChecklistSchema::has(std::string_view item_id) const {
    for (const auto& def : items_)
        if (def.item_id == item_id) return true;
    return false;
}

const ChecklistItemDef& ChecklistSchema::item(std::string_view item_id) const {
    for (const auto& def : items_)
        if (def.item_id == item_id) return def;
    throw SchemaViolation("unknown checklist item '" + std::string(item_id) + "'");
}

std::vector<std::pair<std::string, std::vector<std::string>>>
ChecklistSchema::group_partition() const {
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    for (const auto& def : items_) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == def.group; });
        if (it == groups.end()) {
            groups.emplace_back(def.group, std::vector<std::string>{def.item_id});
        } else {
            it->second.push_back(def.item_id);
        }
    }
    return groups;
}

bool ChecklistState::has(std::string_view item_id) const {
    return entries_.find(std::string(item_id)) != entries_.end();
}

const std::vector<ExtractedValue>& ChecklistState::values(std::string_view item_id) const {
    static const std::vector<ExtractedValue> empty;
    auto it = entries_.find(std::string(item_id));
    return it == entries_.end() ? empty : it->second;
}

void ChecklistState::set(std::string item_id, std::vector<ExtractedValue> values) {
    if (values.empty()) {
        entries_.erase(item_id);
    } else {
        entries_[std::move(item_id)] = std::move(values);
    }
}

namespace {

void validate_values(const std::string& item_id, const std::vector<ExtractedValue>& values) {
    for (const auto& v : values) {
        if (v.value.empty())
            throw ProtocolViolation("item '" + item_id + "' carries an empty value");
        if (v.evidence.empty())
            throw ProtocolViolation("item '" + item_id + "' value '" + v.value +
                                    "' has no evidence");
        for (const auto& e : v.evidence)
            if (e.text.empty())
                throw ProtocolViolation("item '" + item_id + "' value '" + v.value +
                                        "' has evidence with empty text");
    }
}

} // namespace

ChecklistState apply_patch(const ChecklistSchema& schema, const ChecklistState& state,
                           const ChecklistPatch& patch) {
    std::set<std::string> touched;
    for (const auto& [item_id, values] : patch.changes) {
        if (!schema.has(item_id))
            throw SchemaViolation("patch names unknown item '" + item_id + "'");
        if (!touched.insert(item_id).second)
            throw ProtocolViolation("patch lists item '" + item_id + "' more than once");
        validate_values(item_id, values);
        if (patch.mode == PatchMode::Append) {
            for (const auto& v : values)
                if (v.value == kNotApplicable)
                    throw ProtocolViolation("append may not introduce the Not-Applicable "
                                            "sentinel on item '" + item_id + "'");
        } else {
            if (values.empty())
                throw ProtocolViolation("update may not set item '" + item_id +
                                        "' to an empty list");
        }
    }

    ChecklistState next = state;
    for (const auto& [item_id, values] : patch.changes) {
        if (patch.mode == PatchMode::Append) {
            auto merged = next.values(item_id);
            merged.insert(merged.end(), values.begin(), values.end());
            next.set(item_id, std::move(merged));
        } else {
            next.set(item_id, values);
        }
    }
    return next;
}

ItemStatus item_status(const ChecklistSchema& schema, const ChecklistState& state,
                       std::string_view item_id) {
    const auto& def = schema.item(item_id); // validates the id
    (void)def;
    const auto& values = state.values(item_id);
    if (values.empty()) return ItemStatus::Empty;
    if (values.size() == 1 && values.front().value == kNotApplicable)
        return ItemStatus::NotApplicable;
    return ItemStatus::Filled;
}

std::string to_string(ItemStatus status) {
    switch (status) {
        case ItemStatus::Empty: return "empty";
        case ItemStatus::Filled: return "filled";
        case ItemStatus::NotApplicable: return "not_applicable";
    }
    return "unknown";
}

nlohmann::json values_to_json(const std::vector<ExtractedValue>& values) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : values) {
        nlohmann::json ev = nlohmann::json::array();
        for (const auto& e : v.evidence) {
            ev.push_back({{"text", e.text},
                          {"source_document", e.source},
                          {"location", e.location}});
        }
        arr.push_back({{"value", v.value}, {"evidence", std::move(ev)}});
    }
    return arr;
}

std::vector<ExtractedValue> values_from_json(const nlohmann::json& j) {
    if (!j.is_array())
        throw ParseError("extracted values must be an array");
    std::vector<ExtractedValue> values;
    for (const auto& v : j) {
        if (!v.is_object() || !v.contains("value") || !v["value"].is_string())
            throw ParseError("each extracted value needs a string 'value'");
        ExtractedValue ev;
        ev.value = v["value"].get<std::string>();
        if (v.contains("evidence")) {
            if (!v["evidence"].is_array())
                throw ParseError("evidence must be an array");
            for (const auto& e : v["evidence"]) {
                if (!e.is_object() || !e.contains("text") || !e["text"].is_string())
                    throw ParseError("each evidence entry needs string 'text'");
                Evidence entry;
                entry.text = e["text"].get<std::string>();
                if (e.contains("source_document") && e["source_document"].is_string())
                    entry.source = e["source_document"].get<std::string>();
                if (e.contains("location")) {
                    if (e["location"].is_string())
                        entry.location = e["location"].get<std::string>();
                    else if (!e["location"].is_null())
                        entry.location = e["location"].dump();
                }
                ev.evidence.push_back(std::move(entry));
            }
        }
        values.push_back(std::move(ev));
    }
    return values;
}

nlohmann::json state_to_json(const ChecklistState& state, const std::string& schema_version) {
    nlohmann::json items = nlohmann::json::object();
    for (const auto& [item_id, values] : state.entries())
        items[item_id] = {{"extracted", values_to_json(values)}};
    return {{"schema_version", schema_version}, {"items", std::move(items)}};
}

ChecklistState state_from_json(const ChecklistSchema& schema, const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema_version") || !j.contains("items"))
        throw ParseError("state must be an object with schema_version and items");
    if (!j["schema_version"].is_string() ||
        j["schema_version"].get<std::string>() != schema.version())
        throw ParseError("state schema_version does not match schema '" + schema.version() + "'");
    if (!j["items"].is_object())
        throw ParseError("state items must be an object");

    ChecklistState state;
    for (const auto& [item_id, entry] : j["items"].items()) {
        if (!schema.has(item_id))
            throw SchemaViolation("state names unknown item '" + item_id + "'");
        if (!entry.is_object() || !entry.contains("extracted"))
            throw ParseError("state item '" + item_id + "' needs an 'extracted' array");
        auto values = values_from_json(entry["extracted"]);
        for (const auto& v : values) {
            if (v.value.empty())
                throw ParseError("state item '" + item_id + "' carries an empty value");
            if (v.evidence.empty())
                throw ParseError("state item '" + item_id + "' value '" + v.value +
                                 "' has no evidence");
        }
        state.set(item_id, std::move(values));
    }
    return state;
}

ChecklistState load_state(const ChecklistSchema& schema, const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("state file " + path.string() + " is not valid JSON: " + e.what());
    }
    return state_from_json(schema, j);
}

} // namespace lexeval
