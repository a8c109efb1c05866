#pragma once

// Emulated browser decisions: which rendering mode a document gets, whether
// a mismatched stylesheet is parsed, whether the victim can be framed, and
// whether injected style survives CSS error recovery.

#include "rpo/detail/ascii.hpp"
#include "rpo/rendering/css.hpp"
#include "rpo/rendering/doctype.hpp"
#include "rpo/rendering/profile.hpp"
#include "rpo/rendering/security.hpp"
#include "rpo/url.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpo {

namespace detail {

inline bool contains_ci(const std::vector<std::string>& list, std::string_view value)
{
    for (const auto& item : list) {
        if (iequals(item, value))
            return true;
    }
    return false;
}

inline bool any_prefix_ci(const std::vector<std::string>& prefixes, std::string_view value)
{
    for (const auto& prefix : prefixes) {
        if (istarts_with(value, prefix))
            return true;
    }
    return false;
}

} // namespace detail

inline RenderingMode classify_doctype(const DoctypeToken& token, const BrowserProfile& profile)
{
    if (token.force_quirks || token.name != "html")
        return RenderingMode::Quirks;
    if (token.public_id) {
        if (detail::contains_ci(profile.quirks_exceptions, *token.public_id))
            return RenderingMode::Quirks;
        if (detail::contains_ci(profile.standards_exceptions, *token.public_id))
            return RenderingMode::Standards;
    }
    const auto& rules = profile.rules;
    if (token.public_id) {
        const auto& id = *token.public_id;
        if (detail::contains_ci(rules.public_id_exact, id) || detail::any_prefix_ci(rules.public_id_prefixes, id))
            return RenderingMode::Quirks;
        if (!token.system_id && detail::any_prefix_ci(rules.public_id_prefixes_without_system_id, id))
            return RenderingMode::Quirks;
    }
    if (token.system_id && detail::contains_ci(rules.system_id_exact, *token.system_id))
        return RenderingMode::Quirks;
    return RenderingMode::Standards;
}

inline RenderingMode classify_doctype(const std::optional<std::string>& doctype, const BrowserProfile& profile)
{
    if (!doctype)
        return RenderingMode::Quirks;
    return classify_doctype(parse_doctype(*doctype), profile);
}

// Mode of the victim document, possibly loaded in a frame whose parent
// declares a legacy document mode.
inline RenderingMode effective_mode(const std::optional<std::string>& doctype, const BrowserProfile& profile,
    bool framed_by_attacker, const ResponseSecurity& victim)
{
    if (framed_by_attacker && profile.supports_frame_override && !victim.x_ua_compatible)
        return RenderingMode::Quirks;
    return classify_doctype(doctype, profile);
}

namespace detail {

inline std::optional<std::string> origin_of(std::string_view text)
{
    try {
        return parse_url(text).origin();
    } catch (const MalformedUrl&) {
        return std::nullopt;
    }
}

} // namespace detail

// X-Frame-Options. A value repeated across several header lines is reduced to
// one; anything unrecognized or conflicting does not restrict framing.
inline bool framing_allowed(const std::optional<std::string>& xfo, std::string_view attacker_origin,
    std::string_view victim_origin, const BrowserProfile& /*profile*/)
{
    if (!xfo)
        return true;
    std::optional<std::string> value;
    for (const auto& part : detail::split(*xfo, ',')) {
        auto item = std::string(detail::trim(part));
        if (item.empty())
            continue;
        if (value && !detail::iequals(*value, item))
            return true;
        value = item;
    }
    if (!value)
        return true;
    if (detail::iequals(*value, "DENY"))
        return false;
    if (detail::iequals(*value, "SAMEORIGIN"))
        return attacker_origin == victim_origin;
    if (detail::istarts_with(*value, "ALLOW-FROM")) {
        auto rest = detail::trim(std::string_view(*value).substr(10));
        if (rest.empty())
            return true;
        auto origin = detail::origin_of(rest);
        if (!origin)
            return true;
        return *origin == attacker_origin;
    }
    return true;
}

// CSP frame-ancestors. Missing directive allows everything.
inline bool frame_ancestors_allowed(const std::optional<std::string>& csp, std::string_view attacker_origin,
    std::string_view victim_origin)
{
    if (!csp)
        return true;
    for (const auto& directive : detail::split(*csp, ';')) {
        auto words = detail::split(std::string(detail::trim(directive)), ' ');
        std::vector<std::string> tokens;
        for (auto& w : words) {
            if (!detail::trim(w).empty())
                tokens.push_back(std::string(detail::trim(w)));
        }
        if (tokens.empty() || !detail::iequals(tokens.front(), "frame-ancestors"))
            continue;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const auto& source = tokens[i];
            if (source == "*")
                return true;
            if (detail::iequals(source, "'self'") && attacker_origin == victim_origin)
                return true;
            if (detail::iequals(source, "'none'"))
                continue;
            if (auto origin = detail::origin_of(source); origin && *origin == attacker_origin)
                return true;
            if (source.find("://") == std::string::npos) {
                // Bare host source: scheme of the protected page is implied.
                auto scheme_end = victim_origin.find("://");
                if (scheme_end != std::string_view::npos) {
                    auto guess = std::string(victim_origin.substr(0, scheme_end + 3)) + source;
                    if (auto origin = detail::origin_of(guess); origin && *origin == attacker_origin)
                        return true;
                }
            }
        }
        // First frame-ancestors directive wins.
        return false;
    }
    return true;
}

inline bool stylesheet_accepted(const BrowserProfile& profile, RenderingMode mode, const ResponseSecurity& security)
{
    if (is_css_content_type(security.content_type))
        return true;
    if (mode != RenderingMode::Quirks)
        return false;
    return !(security.nosniff && profile.respects_nosniff);
}

inline bool css_would_fire(std::string_view body, std::string_view nonce_url)
{
    return css::loads_background(css::parse_stylesheet(body), nonce_url);
}

} // namespace rpo
