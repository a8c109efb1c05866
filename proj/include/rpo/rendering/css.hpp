#pragma once

// Forgiving CSS reader used to decide whether injected style survives when a
// browser parses an HTML document as a stylesheet.
//
// The tokenizer follows css-syntax-3 closely enough for strings, url tokens,
// comments and blocks. Statement recovery follows the CSS 2.1 rules for
// malformed statements: read to the end of the statement while honoring
// matching pairs of (), [] and {}. A closer with no matching opener at
// top level ends the current (malformed) statement, which is what a run of
// '}' and ']' characters exploits to resynchronize the parser.

#include "rpo/detail/ascii.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpo::css {

enum class TokenKind {
    Whitespace,
    Ident,
    Function,
    AtKeyword,
    Hash,
    String,
    BadString,
    Url,
    BadUrl,
    Number,
    Delim,
    Colon,
    Semicolon,
    Comma,
    OpenCurly,
    CloseCurly,
    OpenSquare,
    CloseSquare,
    OpenParen,
    CloseParen,
    CDO,
    CDC,
};

struct Token {
    TokenKind kind;
    // Decoded value for idents, strings, urls, hashes, functions; the
    // character for delims.
    std::string value;
    std::size_t begin = 0;
    std::size_t end = 0;
};

namespace detail {

using rpo::detail::is_alpha;
using rpo::detail::is_digit;
using rpo::detail::is_hex;

inline bool is_newline(char c) { return c == '\n' || c == '\r' || c == '\f'; }
inline bool is_ws(char c) { return c == ' ' || c == '\t' || is_newline(c); }
inline bool is_name_start(char c) { return is_alpha(c) || c == '_' || static_cast<unsigned char>(c) >= 0x80; }
inline bool is_name_char(char c) { return is_name_start(c) || is_digit(c) || c == '-'; }
inline bool is_non_printable(char c)
{
    auto u = static_cast<unsigned char>(c);
    return u <= 0x08 || u == 0x0b || (u >= 0x0e && u <= 0x1f) || u == 0x7f;
}

class Tokenizer {
public:
    explicit Tokenizer(std::string_view input)
        : m_in(input)
    {
    }

    std::vector<Token> run()
    {
        std::vector<Token> out;
        while (m_pos < m_in.size()) {
            auto begin = m_pos;
            Token token = next();
            token.begin = begin;
            token.end = m_pos;
            if (token.kind == TokenKind::Whitespace && !out.empty() && out.back().kind == TokenKind::Whitespace) {
                out.back().end = m_pos;
                continue;
            }
            out.push_back(std::move(token));
        }
        return out;
    }

private:
    char peek(std::size_t ahead = 0) const { return m_pos + ahead < m_in.size() ? m_in[m_pos + ahead] : '\0'; }
    bool at_end(std::size_t ahead = 0) const { return m_pos + ahead >= m_in.size(); }

    bool valid_escape(std::size_t ahead = 0) const
    {
        return !at_end(ahead + 1) && peek(ahead) == '\\' && !is_newline(peek(ahead + 1));
    }

    bool starts_ident(std::size_t ahead = 0) const
    {
        char c = peek(ahead);
        if (at_end(ahead))
            return false;
        if (c == '-') {
            char d = peek(ahead + 1);
            return (!at_end(ahead + 1) && (is_name_start(d) || d == '-')) || valid_escape(ahead + 1);
        }
        if (is_name_start(c))
            return true;
        return valid_escape(ahead);
    }

    bool starts_number() const
    {
        char c = peek();
        if (is_digit(c))
            return true;
        if (c == '+' || c == '-')
            return is_digit(peek(1)) || (peek(1) == '.' && is_digit(peek(2)));
        if (c == '.')
            return is_digit(peek(1));
        return false;
    }

    std::string consume_escape()
    {
        // m_pos is just past the backslash.
        if (at_end())
            return "\xEF\xBF\xBD";
        if (is_hex(peek())) {
            unsigned code = 0;
            for (int i = 0; i < 6 && !at_end() && is_hex(peek()); ++i)
                code = code * 16 + static_cast<unsigned>(rpo::detail::hex_value(m_in[m_pos++]));
            if (!at_end() && is_ws(peek()))
                ++m_pos;
            if (code > 0 && code < 0x80)
                return std::string(1, static_cast<char>(code));
            return "\xEF\xBF\xBD";
        }
        return std::string(1, m_in[m_pos++]);
    }

    std::string consume_name()
    {
        std::string out;
        while (!at_end()) {
            if (is_name_char(peek())) {
                out += m_in[m_pos++];
            } else if (valid_escape()) {
                ++m_pos;
                out += consume_escape();
            } else {
                break;
            }
        }
        return out;
    }

    Token consume_string(char quote)
    {
        std::string value;
        while (!at_end()) {
            char c = m_in[m_pos];
            if (c == quote) {
                ++m_pos;
                return { TokenKind::String, value };
            }
            if (is_newline(c))
                return { TokenKind::BadString, value };
            if (c == '\\') {
                if (at_end(1)) {
                    ++m_pos;
                    continue;
                }
                if (is_newline(peek(1))) {
                    m_pos += 2;
                    continue;
                }
                ++m_pos;
                value += consume_escape();
                continue;
            }
            value += c;
            ++m_pos;
        }
        return { TokenKind::String, value };
    }

    void consume_bad_url_remnants()
    {
        while (!at_end()) {
            if (peek() == ')') {
                ++m_pos;
                return;
            }
            if (valid_escape()) {
                ++m_pos;
                consume_escape();
                continue;
            }
            ++m_pos;
        }
    }

    Token consume_url()
    {
        std::string value;
        while (!at_end() && is_ws(peek()))
            ++m_pos;
        while (!at_end()) {
            char c = peek();
            if (c == ')') {
                ++m_pos;
                return { TokenKind::Url, value };
            }
            if (is_ws(c)) {
                while (!at_end() && is_ws(peek()))
                    ++m_pos;
                if (at_end() || peek() == ')') {
                    if (!at_end())
                        ++m_pos;
                    return { TokenKind::Url, value };
                }
                consume_bad_url_remnants();
                return { TokenKind::BadUrl, value };
            }
            if (c == '"' || c == '\'' || c == '(' || is_non_printable(c)) {
                consume_bad_url_remnants();
                return { TokenKind::BadUrl, value };
            }
            if (c == '\\') {
                if (valid_escape()) {
                    ++m_pos;
                    value += consume_escape();
                    continue;
                }
                consume_bad_url_remnants();
                return { TokenKind::BadUrl, value };
            }
            value += c;
            ++m_pos;
        }
        return { TokenKind::Url, value };
    }

    Token consume_ident_like()
    {
        auto name = consume_name();
        if (rpo::detail::iequals(name, "url") && peek() == '(') {
            ++m_pos;
            std::size_t look = m_pos;
            while (look < m_in.size() && is_ws(m_in[look]))
                ++look;
            if (look < m_in.size() && (m_in[look] == '"' || m_in[look] == '\''))
                return { TokenKind::Function, "url" };
            return consume_url();
        }
        if (peek() == '(') {
            ++m_pos;
            return { TokenKind::Function, rpo::detail::lowercase(name) };
        }
        return { TokenKind::Ident, name };
    }

    Token consume_number()
    {
        std::string value;
        if (peek() == '+' || peek() == '-')
            value += m_in[m_pos++];
        while (is_digit(peek()) && !at_end())
            value += m_in[m_pos++];
        if (peek() == '.' && is_digit(peek(1))) {
            value += m_in[m_pos++];
            while (is_digit(peek()) && !at_end())
                value += m_in[m_pos++];
        }
        if ((peek() == 'e' || peek() == 'E') && (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
            value += m_in[m_pos++];
            value += m_in[m_pos++];
            while (is_digit(peek()) && !at_end())
                value += m_in[m_pos++];
        }
        if (starts_ident())
            value += consume_name();
        else if (peek() == '%')
            value += m_in[m_pos++];
        return { TokenKind::Number, value };
    }

    Token next()
    {
        char c = m_in[m_pos];
        if (c == '/' && peek(1) == '*') {
            auto end = m_in.find("*/", m_pos + 2);
            m_pos = end == std::string_view::npos ? m_in.size() : end + 2;
            return { TokenKind::Whitespace, "" };
        }
        if (is_ws(c)) {
            while (!at_end() && is_ws(peek()))
                ++m_pos;
            return { TokenKind::Whitespace, "" };
        }
        if (c == '"' || c == '\'') {
            ++m_pos;
            return consume_string(c);
        }
        if (c == '#') {
            if (is_name_char(peek(1)) || valid_escape(1)) {
                ++m_pos;
                return { TokenKind::Hash, consume_name() };
            }
            ++m_pos;
            return { TokenKind::Delim, "#" };
        }
        if (starts_number())
            return consume_number();
        if (c == '-' && peek(1) == '-' && peek(2) == '>') {
            m_pos += 3;
            return { TokenKind::CDC, "" };
        }
        if (starts_ident())
            return consume_ident_like();
        if (c == '<' && m_in.substr(m_pos, 4) == "<!--") {
            m_pos += 4;
            return { TokenKind::CDO, "" };
        }
        if (c == '@' && starts_ident(1)) {
            ++m_pos;
            return { TokenKind::AtKeyword, consume_name() };
        }
        ++m_pos;
        switch (c) {
        case '(':
            return { TokenKind::OpenParen, "(" };
        case ')':
            return { TokenKind::CloseParen, ")" };
        case '[':
            return { TokenKind::OpenSquare, "[" };
        case ']':
            return { TokenKind::CloseSquare, "]" };
        case '{':
            return { TokenKind::OpenCurly, "{" };
        case '}':
            return { TokenKind::CloseCurly, "}" };
        case ':':
            return { TokenKind::Colon, ":" };
        case ';':
            return { TokenKind::Semicolon, ";" };
        case ',':
            return { TokenKind::Comma, "," };
        default:
            return { TokenKind::Delim, std::string(1, c) };
        }
    }

    std::string_view m_in;
    std::size_t m_pos = 0;
};

} // namespace detail

inline std::vector<Token> tokenize(std::string_view input)
{
    return detail::Tokenizer(input).run();
}

struct Declaration {
    std::string name;
    std::vector<Token> value;
};

enum class StatementOutcome {
    Rule,
    InvalidSelector,
    // A bad string or bad url inside the statement.
    Malformed,
    // Ended by a closer with no matching opener.
    UnmatchedCloser,
    AtRule,
    // Input ended inside the prelude.
    Truncated,
};

inline std::string_view outcome_name(StatementOutcome outcome)
{
    switch (outcome) {
    case StatementOutcome::Rule:
        return "rule";
    case StatementOutcome::InvalidSelector:
        return "invalid-selector";
    case StatementOutcome::Malformed:
        return "malformed";
    case StatementOutcome::UnmatchedCloser:
        return "unmatched-closer";
    case StatementOutcome::AtRule:
        return "at-rule";
    case StatementOutcome::Truncated:
        return "truncated";
    }
    return "?";
}

struct Statement {
    StatementOutcome outcome;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string selector;
    std::vector<Declaration> declarations;
};

namespace detail {

inline bool is_opener(TokenKind k)
{
    return k == TokenKind::OpenCurly || k == TokenKind::OpenSquare || k == TokenKind::OpenParen || k == TokenKind::Function;
}

inline bool is_closer(TokenKind k)
{
    return k == TokenKind::CloseCurly || k == TokenKind::CloseSquare || k == TokenKind::CloseParen;
}

inline TokenKind closer_for(TokenKind opener)
{
    switch (opener) {
    case TokenKind::OpenCurly:
        return TokenKind::CloseCurly;
    case TokenKind::OpenSquare:
        return TokenKind::CloseSquare;
    default:
        return TokenKind::CloseParen;
    }
}

// Pops the stack down to and including `closer`. False if it isn't open.
inline bool close_through(std::vector<TokenKind>& stack, TokenKind closer)
{
    for (auto i = stack.size(); i > 0; --i) {
        if (stack[i - 1] == closer) {
            stack.resize(i - 1);
            return true;
        }
    }
    return false;
}

class SelectorChecker {
public:
    explicit SelectorChecker(const std::vector<Token>& tokens)
        : m_tokens(tokens)
    {
    }

    bool valid()
    {
        skip_ws();
        if (!complex())
            return false;
        while (true) {
            skip_ws();
            if (done())
                return true;
            if (kind() != TokenKind::Comma)
                return false;
            ++m_i;
            skip_ws();
            if (!complex())
                return false;
        }
    }

private:
    bool done() const { return m_i >= m_tokens.size(); }
    TokenKind kind() const { return m_tokens[m_i].kind; }
    bool delim(char c) const { return !done() && kind() == TokenKind::Delim && m_tokens[m_i].value[0] == c; }
    void skip_ws()
    {
        while (!done() && kind() == TokenKind::Whitespace)
            ++m_i;
    }

    bool complex()
    {
        if (!compound())
            return false;
        while (!done()) {
            auto save = m_i;
            bool had_ws = !done() && kind() == TokenKind::Whitespace;
            skip_ws();
            if (done() || kind() == TokenKind::Comma) {
                m_i = save;
                skip_ws();
                return true;
            }
            if (delim('>') || delim('+') || delim('~')) {
                ++m_i;
                skip_ws();
            } else if (!had_ws) {
                return false;
            }
            if (!compound())
                return false;
        }
        return true;
    }

    bool compound()
    {
        bool any = false;
        if (!done() && (kind() == TokenKind::Ident || delim('*'))) {
            ++m_i;
            any = true;
        }
        while (!done()) {
            if (kind() == TokenKind::Hash) {
                ++m_i;
            } else if (delim('.')) {
                ++m_i;
                if (done() || kind() != TokenKind::Ident)
                    return false;
                ++m_i;
            } else if (kind() == TokenKind::OpenSquare) {
                if (!attribute())
                    return false;
            } else if (kind() == TokenKind::Colon) {
                ++m_i;
                if (!done() && kind() == TokenKind::Colon)
                    ++m_i;
                if (done())
                    return false;
                if (kind() == TokenKind::Ident) {
                    ++m_i;
                } else if (kind() == TokenKind::Function) {
                    if (!balanced_function())
                        return false;
                } else {
                    return false;
                }
            } else {
                break;
            }
            any = true;
        }
        return any;
    }

    bool attribute()
    {
        ++m_i;
        skip_ws();
        if (done() || kind() != TokenKind::Ident)
            return false;
        ++m_i;
        skip_ws();
        if (done())
            return false;
        if (kind() == TokenKind::CloseSquare) {
            ++m_i;
            return true;
        }
        if (delim('~') || delim('|') || delim('^') || delim('$') || delim('*'))
            ++m_i;
        if (!delim('='))
            return false;
        ++m_i;
        skip_ws();
        if (done() || (kind() != TokenKind::Ident && kind() != TokenKind::String))
            return false;
        ++m_i;
        skip_ws();
        if (!done() && kind() == TokenKind::Ident)
            ++m_i;
        skip_ws();
        if (done() || kind() != TokenKind::CloseSquare)
            return false;
        ++m_i;
        return true;
    }

    bool balanced_function()
    {
        int depth = 0;
        while (!done()) {
            auto k = kind();
            ++m_i;
            if (is_opener(k)) {
                ++depth;
            } else if (is_closer(k)) {
                if (--depth == 0)
                    return k == TokenKind::CloseParen;
            } else if (k == TokenKind::BadString || k == TokenKind::BadUrl) {
                return false;
            }
        }
        return false;
    }

    const std::vector<Token>& m_tokens;
    std::size_t m_i = 0;
};

inline std::vector<Declaration> parse_declarations(const std::vector<Token>& tokens)
{
    std::vector<Declaration> out;
    std::size_t i = 0;
    auto skip_to_semicolon = [&](bool& bad) {
        std::vector<TokenKind> stack;
        while (i < tokens.size()) {
            auto k = tokens[i].kind;
            if (k == TokenKind::Semicolon && stack.empty())
                return;
            if (k == TokenKind::BadString || k == TokenKind::BadUrl)
                bad = true;
            if (is_opener(k))
                stack.push_back(closer_for(k));
            else if (is_closer(k))
                close_through(stack, k);
            ++i;
        }
    };
    while (i < tokens.size()) {
        auto k = tokens[i].kind;
        if (k == TokenKind::Whitespace || k == TokenKind::Semicolon) {
            ++i;
            continue;
        }
        bool bad = false;
        if (k != TokenKind::Ident) {
            skip_to_semicolon(bad);
            continue;
        }
        Declaration decl { rpo::detail::lowercase(tokens[i].value), {} };
        ++i;
        while (i < tokens.size() && tokens[i].kind == TokenKind::Whitespace)
            ++i;
        if (i >= tokens.size() || tokens[i].kind != TokenKind::Colon) {
            skip_to_semicolon(bad);
            continue;
        }
        ++i;
        auto value_begin = i;
        skip_to_semicolon(bad);
        for (auto j = value_begin; j < i; ++j) {
            if (tokens[j].kind != TokenKind::Whitespace || !decl.value.empty())
                decl.value.push_back(tokens[j]);
        }
        while (!decl.value.empty() && decl.value.back().kind == TokenKind::Whitespace)
            decl.value.pop_back();
        if (!bad && !decl.value.empty())
            out.push_back(std::move(decl));
    }
    return out;
}

} // namespace detail

inline std::vector<Statement> parse_stylesheet(std::string_view input)
{
    using namespace detail;
    auto tokens = tokenize(input);
    std::vector<Statement> out;
    std::size_t i = 0;
    const auto n = tokens.size();

    while (i < n) {
        auto k = tokens[i].kind;
        if (k == TokenKind::Whitespace || k == TokenKind::CDO || k == TokenKind::CDC) {
            ++i;
            continue;
        }
        Statement statement { StatementOutcome::Truncated, tokens[i].begin, tokens[i].begin, {}, {} };
        const bool at_rule = k == TokenKind::AtKeyword;
        std::vector<TokenKind> stack;
        std::vector<Token> prelude;
        bool malformed = false;
        bool finished = false;

        while (i < n && !finished) {
            const auto& token = tokens[i];
            if (at_rule && token.kind == TokenKind::Semicolon && stack.empty()) {
                ++i;
                statement.outcome = StatementOutcome::AtRule;
                statement.end = token.end;
                finished = true;
                break;
            }
            if (token.kind == TokenKind::OpenCurly && stack.empty()) {
                ++i;
                std::vector<Token> block;
                std::vector<TokenKind> inner;
                statement.end = input.size();
                while (i < n) {
                    const auto& t = tokens[i++];
                    if (is_opener(t.kind)) {
                        inner.push_back(closer_for(t.kind));
                    } else if (is_closer(t.kind)) {
                        if (t.kind == TokenKind::CloseCurly && !close_through(inner, TokenKind::CloseCurly)) {
                            statement.end = t.end;
                            break;
                        }
                        if (t.kind != TokenKind::CloseCurly && !close_through(inner, t.kind))
                            continue;
                    }
                    block.push_back(t);
                }
                if (at_rule) {
                    statement.outcome = StatementOutcome::AtRule;
                } else if (malformed) {
                    statement.outcome = StatementOutcome::Malformed;
                } else {
                    while (!prelude.empty() && prelude.back().kind == TokenKind::Whitespace)
                        prelude.pop_back();
                    if (!prelude.empty())
                        statement.selector = std::string(input.substr(prelude.front().begin, prelude.back().end - prelude.front().begin));
                    statement.outcome = SelectorChecker(prelude).valid() ? StatementOutcome::Rule : StatementOutcome::InvalidSelector;
                    if (statement.outcome == StatementOutcome::Rule)
                        statement.declarations = parse_declarations(block);
                }
                finished = true;
                break;
            }
            if (is_opener(token.kind)) {
                stack.push_back(closer_for(token.kind));
            } else if (is_closer(token.kind)) {
                if (!close_through(stack, token.kind)) {
                    ++i;
                    statement.outcome = StatementOutcome::UnmatchedCloser;
                    statement.end = token.end;
                    finished = true;
                    break;
                }
            } else if (token.kind == TokenKind::BadString || token.kind == TokenKind::BadUrl) {
                malformed = true;
            }
            prelude.push_back(token);
            statement.end = token.end;
            ++i;
        }
        out.push_back(std::move(statement));
    }
    return out;
}

// True iff a rule with a valid selector keeps a background declaration that
// loads exactly `image_url`.
inline bool loads_background(const std::vector<Statement>& statements, std::string_view image_url)
{
    for (const auto& statement : statements) {
        if (statement.outcome != StatementOutcome::Rule)
            continue;
        for (const auto& decl : statement.declarations) {
            if (decl.name != "background" && decl.name != "background-image")
                continue;
            for (std::size_t i = 0; i < decl.value.size(); ++i) {
                const auto& t = decl.value[i];
                if (t.kind == TokenKind::Url && t.value == image_url)
                    return true;
                if (t.kind == TokenKind::Function && t.value == "url") {
                    auto j = i + 1;
                    while (j < decl.value.size() && decl.value[j].kind == TokenKind::Whitespace)
                        ++j;
                    if (j < decl.value.size() && decl.value[j].kind == TokenKind::String && decl.value[j].value == image_url)
                        return true;
                }
            }
        }
    }
    return false;
}

// One line per statement: "<outcome> <begin>-<end> <selector>".
inline std::string trace(std::string_view input)
{
    std::string out;
    for (const auto& s : parse_stylesheet(input)) {
        out += std::string(outcome_name(s.outcome)) + " " + std::to_string(s.begin) + "-" + std::to_string(s.end);
        if (s.outcome == StatementOutcome::Rule) {
            out += " " + s.selector + " {";
            for (const auto& d : s.declarations) {
                out += " " + d.name + ":";
                for (const auto& t : d.value)
                    out += t.kind == TokenKind::Url ? "url(" + t.value + ")" : std::string(input.substr(t.begin, t.end - t.begin));
                out += ";";
            }
            out += " }";
        }
        out += "\n";
    }
    return out;
}

} // namespace rpo::css
