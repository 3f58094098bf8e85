// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lexeval {

// The sentinel is an exact, case-sensitive string. An item counts as
// Not-Applicable only when its list holds exactly one entry with this value.
inline constexpr std::string_view kNotApplicable = "Not Applicable";

enum class Cardinality { Single, Multi };

struct ChecklistItemDef {
    std::string item_id;
    std::string group;
    std::string display_name;
    std::string description; // full definition text used in prompts
    Cardinality cardinality = Cardinality::Multi;
};

/// The 26-item / 9-group checklist, loaded from a schema data file.
/// Cardinality is schema data, overridable without code changes.
class ChecklistSchema {
public:
    static ChecklistSchema load(const std::filesystem::path& path);
    static ChecklistSchema from_json(const nlohmann::json& j);

    const std::string& version() const { return version_; }
    const std::vector<ChecklistItemDef>& items() const { return items_; }
    bool has(std::string_view item_id) const;
    const ChecklistItemDef& item(std::string_view item_id) const; // throws SchemaViolation

    /// Groups in first-appearance order, each with its item_ids in schema
    /// order. Together the groups partition all items.
    std::vector<std::pair<std::string, std::vector<std::string>>> group_partition() const;

private:
    std::string version_;
    std::vector<ChecklistItemDef> items_;
};

struct Evidence {
    std::string text;     // verbatim snippet, never empty
    std::string source;   // "summary" or a document name
    std::string location; // free-form locator (page/section/chunk/token offsets)

    bool operator==(const Evidence&) const = default;
};

struct ExtractedValue {
    std::string value;
    std::vector<Evidence> evidence; // nonempty

    bool operator==(const ExtractedValue&) const = default;
};

enum class ItemStatus { Empty, Filled, NotApplicable };

enum class PatchMode { Append, Update };

/// Batch checklist mutation. changes is an ordered list so that a malformed
/// patch naming the same item twice can be detected and rejected.
struct ChecklistPatch {
    PatchMode mode = PatchMode::Append;
    std::vector<std::pair<std::string, std::vector<ExtractedValue>>> changes;
};

class ChecklistState {
public:
    bool has(std::string_view item_id) const;
    const std::vector<ExtractedValue>& values(std::string_view item_id) const;
    void set(std::string item_id, std::vector<ExtractedValue> values);
    const std::map<std::string, std::vector<ExtractedValue>>& entries() const {
        return entries_;
    }

    bool operator==(const ChecklistState&) const = default;

private:
    std::map<std::string, std::vector<ExtractedValue>> entries_;
};

// Append extends each listed item's list in order; update replaces the whole
// list. Violations: unknown item (SchemaViolation); duplicate item in one
// patch, value without evidence, append introducing the Not-Applicable
// sentinel, or update to an empty list (ProtocolViolation).
ChecklistState apply_patch(const ChecklistSchema& schema, const ChecklistState& state,
                           const ChecklistPatch& patch);

ItemStatus item_status(const ChecklistSchema& schema, const ChecklistState& state,
                       std::string_view item_id);

std::string to_string(ItemStatus status);

// State files mirror the prompts' output shape (reasoning omitted):
//   {"schema_version": ..., "items": {id: {"extracted": [{"value": ...,
//    "evidence": [{"text","source_document","location"}]}]}}}
nlohmann::json state_to_json(const ChecklistState& state, const std::string& schema_version);
ChecklistState state_from_json(const ChecklistSchema& schema, const nlohmann::json& j);
ChecklistState load_state(const ChecklistSchema& schema, const std::filesystem::path& path);

nlohmann::json values_to_json(const std::vector<ExtractedValue>& values);
std::vector<ExtractedValue> values_from_json(const nlohmann::json& j);

} // namespace lexeval
