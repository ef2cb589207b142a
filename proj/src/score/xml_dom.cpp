#include "xml_dom.hpp"

#include <expat.h>

#include <climits>

#include "vocaldyn/error.hpp"

namespace vocaldyn::score::xml {
namespace {

struct Builder {
    XML_Parser parser = nullptr;
    std::unique_ptr<Node> root;
    std::vector<Node*> stack;
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
    auto* b = static_cast<Builder*>(data);
    auto node = std::make_unique<Node>();
    node->name = name;
    node->line = static_cast<long>(XML_GetCurrentLineNumber(b->parser));
    for (int i = 0; attrs[i]; i += 2) node->attributes.emplace_back(attrs[i], attrs[i + 1]);
    Node* raw = node.get();
    if (b->stack.empty()) b->root = std::move(node);
    else b->stack.back()->children.push_back(std::move(node));
    b->stack.push_back(raw);
}

void XMLCALL on_end(void* data, const XML_Char*) {
    static_cast<Builder*>(data)->stack.pop_back();
}

void XMLCALL on_text(void* data, const XML_Char* s, int len) {
    auto* b = static_cast<Builder*>(data);
    if (!b->stack.empty()) b->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string Node::child_text(std::string_view n) const {
    const Node* c = child(n);
    return c ? trim(c->text) : std::string();
}

std::unique_ptr<Node> parse(std::string_view document) {
    if (document.size() > static_cast<std::size_t>(INT_MAX)) throw ParseError("XML document too large");
    Builder b;
    b.parser = XML_ParserCreate(nullptr);
    if (!b.parser) throw Error("cannot create XML parser");
    XML_SetUserData(b.parser, &b);
    XML_SetElementHandler(b.parser, on_start, on_end);
    XML_SetCharacterDataHandler(b.parser, on_text);
    const auto status = XML_Parse(b.parser, document.data(), static_cast<int>(document.size()), XML_TRUE);
    if (status != XML_STATUS_OK) {
        const std::string msg = std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(b.parser));
        const long line = static_cast<long>(XML_GetCurrentLineNumber(b.parser));
        XML_ParserFree(b.parser);
        throw ParseError(msg, line);
    }
    XML_ParserFree(b.parser);
    if (!b.root) throw ParseError("XML document has no root element");
    return std::move(b.root);
}

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace vocaldyn::score::xml
