#include "shotweave/prompts.hpp"

#include <fstream>
#include <sstream>

#include "shotweave/builtin_data.hpp"
#include "shotweave/error.hpp"

namespace shotweave {

PromptLibrary::PromptLibrary() {
    for (const auto& [name, text] : detail::kBuiltinPrompts) {
        templates_.emplace(std::string(name), std::string(text));
    }
}

PromptLibrary::PromptLibrary(const std::filesystem::path& override_dir) : PromptLibrary() {
    if (!std::filesystem::is_directory(override_dir)) {
        throw ValidationError("prompt directory not found: " + override_dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(override_dir)) {
        if (entry.path().extension() != ".txt") {
            continue;
        }
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        templates_[entry.path().stem().string()] = buf.str();
    }
}

const std::string& PromptLibrary::get(const std::string& name) const {
    const auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw NotFoundError("no prompt template named '" + name + "'");
    }
    return it->second;
}

std::string PromptLibrary::render(const std::string& name, const std::map<std::string, std::string>& values) const {
    return render_template(get(name), values);
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) {
            throw ValidationError("unterminated placeholder in prompt template");
        }
        out.append(text, pos, open - pos);
        const std::string key = text.substr(open + 2, close - open - 2);
        const auto it = values.find(key);
        if (it == values.end()) {
            throw ValidationError("prompt placeholder '" + key + "' has no value");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

}  // namespace shotweave
