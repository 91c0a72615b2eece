#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace shotweave {

// Named prompt templates with {{placeholder}} slots. Built-in templates are
// compiled in; an override directory replaces any template whose
// <name>.txt file exists there.
class PromptLibrary {
public:
    PromptLibrary();
    explicit PromptLibrary(const std::filesystem::path& override_dir);

    const std::string& get(const std::string& name) const;
    bool contains(const std::string& name) const { return templates_.contains(name); }
    void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }

    // Throws ValidationError when a placeholder has no value.
    std::string render(const std::string& name, const std::map<std::string, std::string>& values) const;

private:
    std::map<std::string, std::string> templates_;
};

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values);

}  // namespace shotweave
