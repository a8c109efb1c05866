#pragma once

#include "rpo/detail/ascii.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace rpo {

enum class RenderingMode {
    Standards,
    Quirks,
};

inline std::string_view mode_name(RenderingMode mode)
{
    return mode == RenderingMode::Quirks ? "Quirks" : "Standards";
}

// A doctype declaration broken into the parts quirks detection looks at.
struct DoctypeToken {
    std::string name;
    std::optional<std::string> public_id;
    std::optional<std::string> system_id;
    bool force_quirks = false;
};

namespace detail {

inline std::optional<std::string> consume_quoted(std::string_view text, std::size_t& i)
{
    while (i < text.size() && is_space(text[i]))
        ++i;
    if (i >= text.size() || (text[i] != '"' && text[i] != '\''))
        return std::nullopt;
    char quote = text[i++];
    auto end = text.find(quote, i);
    std::string value(text.substr(i, end == std::string_view::npos ? std::string_view::npos : end - i));
    i = end == std::string_view::npos ? text.size() : end + 1;
    return value;
}

} // namespace detail

// Accepts a full "<!DOCTYPE ...>" declaration, its inner text, or a bare
// public identifier, quoted or not (shorthand for `html PUBLIC "<id>"`).
inline DoctypeToken parse_doctype(std::string_view raw)
{
    DoctypeToken token;
    auto text = detail::trim(raw);
    if (detail::istarts_with(text, "<!doctype"))
        text.remove_prefix(9);
    else if (text.substr(0, 2) == "<!")
        text.remove_prefix(2);
    if (!text.empty() && text.back() == '>')
        text.remove_suffix(1);
    text = detail::trim(text);

    std::size_t i = 0;
    if (text.substr(0, 3) == "-//" || text.substr(0, 3) == "+//") {
        token.name = "html";
        token.public_id = std::string(text);
        return token;
    }
    if (!text.empty() && (text.front() == '"' || text.front() == '\'')) {
        token.name = "html";
        token.public_id = detail::consume_quoted(text, i);
        token.system_id = detail::consume_quoted(text, i);
        return token;
    }

    while (i < text.size() && !detail::is_space(text[i]))
        token.name += detail::to_lower(text[i++]);
    if (token.name.empty()) {
        token.force_quirks = true;
        return token;
    }
    while (i < text.size() && detail::is_space(text[i]))
        ++i;
    if (i >= text.size())
        return token;

    auto keyword = text.substr(i, 6);
    if (detail::iequals(keyword, "public")) {
        i += 6;
        token.public_id = detail::consume_quoted(text, i);
        if (!token.public_id) {
            token.force_quirks = true;
            return token;
        }
        token.system_id = detail::consume_quoted(text, i);
    } else if (detail::iequals(keyword, "system")) {
        i += 6;
        token.system_id = detail::consume_quoted(text, i);
        if (!token.system_id) {
            token.force_quirks = true;
            return token;
        }
    } else {
        token.force_quirks = true;
        return token;
    }
    // Trailing junk after the identifiers is a parse error but does not
    // force quirks.
    return token;
}

} // namespace rpo
