// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lexeval {

// Verbatim text with {{NAME}} placeholders. Rendering substitutes every
// placeholder from the bindings and changes nothing else; a placeholder
// without a binding is an error, unused bindings are ignored.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string template_id, std::string body);

    const std::string& id() const { return id_; }
    const std::string& body() const { return body_; }
    const std::vector<std::string>& placeholders() const { return placeholders_; }

    std::string render(const std::map<std::string, std::string>& bindings) const;

private:
    std::string id_;
    std::string body_;
    std::vector<std::string> placeholders_;
};

/// All *.txt files of a directory, keyed by stem. get() with an unknown id
/// throws TemplateError.
class PromptSet {
public:
    static PromptSet load(const std::filesystem::path& dir);

    const PromptTemplate& get(std::string_view template_id) const;
    bool has(std::string_view template_id) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

} // namespace lexeval
