#include "rtlforge/hdl_text.hpp"

#include <cctype>

#include <boost/regex.hpp>

namespace rtlforge {

std::string strip_hdl_comments(std::string_view source) {
    std::string out(source);
    enum class State { Code, LineComment, BlockComment, String } state = State::Code;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const char c = out[i];
        const char next = i + 1 < out.size() ? out[i + 1] : '\0';
        switch (state) {
            case State::Code:
                if (c == '/' && next == '/') {
                    state = State::LineComment;
                    out[i] = ' ';
                } else if (c == '/' && next == '*') {
                    state = State::BlockComment;
                    out[i] = ' ';
                    out[++i] = ' ';
                } else if (c == '"') {
                    state = State::String;
                }
                break;
            case State::LineComment:
                if (c == '\n') {
                    state = State::Code;
                } else {
                    out[i] = ' ';
                }
                break;
            case State::BlockComment:
                if (c == '*' && next == '/') {
                    out[i] = ' ';
                    out[++i] = ' ';
                    state = State::Code;
                } else if (c != '\n') {
                    out[i] = ' ';
                }
                break;
            case State::String:
                if (c == '\\' && next != '\0' && next != '\n') {
                    out[i] = ' ';
                    out[++i] = ' ';
                } else if (c == '"' || c == '\n') {
                    state = State::Code;
                } else {
                    out[i] = ' ';
                }
                break;
        }
    }
    return out;
}

bool module_is_portless(std::string_view source) {
    const std::string text = strip_hdl_comments(source);
    static const boost::regex kDecl(R"((?<![\w$`])(module|macromodule)\s+[A-Za-z_][\w$]*)");
    boost::smatch m;
    if (!boost::regex_search(text, m, kDecl)) return false;
    std::size_t pos = static_cast<std::size_t>(m.position(std::size_t{0}) + m.length(std::size_t{0}));
    auto skip_space = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto skip_parens = [&] {
        int depth = 0;
        for (; pos < text.size(); ++pos) {
            if (text[pos] == '(') ++depth;
            if (text[pos] == ')' && --depth == 0) {
                ++pos;
                return;
            }
        }
    };
    skip_space();
    if (pos < text.size() && text[pos] == '#') {
        ++pos;
        skip_space();
        skip_parens();
        skip_space();
    }
    if (pos >= text.size()) return false;
    if (text[pos] == ';') return true;
    if (text[pos] != '(') return false;
    ++pos;
    skip_space();
    return pos < text.size() && text[pos] == ')';
}

std::optional<std::string> find_instance_name(std::string_view testbench,
                                              std::string_view module_name) {
    const std::string text = strip_hdl_comments(testbench);
    const boost::regex pattern("(?<![\\w$`])" + regex_escape(module_name) +
                               R"(\s*(?:#\s*\([^;]*?\)\s*)?([A-Za-z_][\w$]*)\s*(?:\[[^\]]*\]\s*)?\()");
    boost::smatch m;
    auto begin = text.cbegin();
    while (boost::regex_search(begin, text.cend(), m, pattern)) {
        auto pos = static_cast<std::size_t>(m[0].first - text.cbegin());
        while (pos > 0 && std::isspace(static_cast<unsigned char>(text[pos - 1]))) --pos;
        const bool declaration = pos >= 6 && text.compare(pos - 6, 6, "module") == 0;
        if (!declaration) return m[1].str();
        begin = m[0].second;
    }
    return std::nullopt;
}

std::string regex_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size() * 2);
    for (char c : text) {
        if (std::string_view(R"(\^$.|?*+()[]{})").find(c) != std::string_view::npos) {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace rtlforge
