// SPDX-License-Identifier: Apache-2.0
#include "lexeval/prompt_template.hpp"

#include <algorithm>

#include "lexeval/errors.hpp"
#include "lexeval/text_util.hpp"

namespace lexeval {

namespace {

// Placeholder names are leading identifiers: {{ALL_CAPS_OR_lower}}. Braces
// that do not form a well-shaped placeholder pass through as literal text,
// since prompts legitimately contain JSON examples full of braces.
bool is_placeholder_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_';
}

std::vector<std::pair<std::size_t, std::string>> scan_placeholders(const std::string& body) {
    std::vector<std::pair<std::size_t, std::string>> found;
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string::npos) {
        std::size_t name_begin = pos + 2;
        std::size_t cursor = name_begin;
        while (cursor < body.size() && is_placeholder_char(body[cursor])) ++cursor;
        if (cursor > name_begin && cursor + 1 < body.size() && body[cursor] == '}' &&
            body[cursor + 1] == '}') {
            found.emplace_back(pos, body.substr(name_begin, cursor - name_begin));
            pos = cursor + 2;
        } else {
            ++pos;
        }
    }
    return found;
}

} // namespace

PromptTemplate::PromptTemplate(std::string template_id, std::string body)
    : id_(std::move(template_id)), body_(std::move(body)) {
    for (const auto& [pos, name] : scan_placeholders(body_)) {
        (void)pos;
        if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end())
            placeholders_.push_back(name);
    }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    auto found = scan_placeholders(body_);
    std::string out;
    out.reserve(body_.size());
    std::size_t cursor = 0;
    for (const auto& [pos, name] : found) {
        auto it = bindings.find(name);
        if (it == bindings.end())
            throw TemplateError("template '" + id_ + "' placeholder '" + name +
                                "' has no binding");
        out.append(body_, cursor, pos - cursor);
        out.append(it->second);
        cursor = pos + name.size() + 4;
    }
    out.append(body_, cursor, body_.size() - cursor);
    return out;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("prompt directory not found: " + dir.string());
    PromptSet set;
    set.dir_ = dir;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        auto id = entry.path().stem().string();
        set.templates_.emplace(id, PromptTemplate(id, read_file(entry.path())));
    }
    if (set.templates_.empty())
        throw ConfigError("prompt directory has no .txt templates: " + dir.string());
    return set;
}

const PromptTemplate& PromptSet::get(std::string_view template_id) const {
    auto it = templates_.find(template_id);
    if (it == templates_.end())
        throw TemplateError("unknown prompt template '" + std::string(template_id) + "'");
    return it->second;
}

bool PromptSet::has(std::string_view template_id) const {
    return templates_.find(template_id) != templates_.end();
}

} // namespace lexeval
