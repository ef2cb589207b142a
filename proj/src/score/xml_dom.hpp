#pragma once

// Minimal element tree built with expat. Internal to the score library.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace vocaldyn::score::xml {

struct Node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string text;  // concatenated character data directly inside this element
    std::vector<std::unique_ptr<Node>> children;
    long line = 0;

    const Node* child(std::string_view n) const {
        for (const auto& c : children)
            if (c->name == n) return c.get();
        return nullptr;
    }
    /// Trimmed text of the first child named n, or empty.
    std::string child_text(std::string_view n) const;
    std::string_view attribute(std::string_view n) const {
        for (const auto& [k, v] : attributes)
            if (k == n) return v;
        return {};
    }
    bool has(std::string_view n) const { return child(n) != nullptr; }
};

/// Throws ParseError with the expat line number on malformed input.
std::unique_ptr<Node> parse(std::string_view document);

std::string trim(std::string_view s);
std::string escape(std::string_view s);

}  // namespace vocaldyn::score::xml
