#pragma once

#include "rpo/error.hpp"
#include "rpo/payload.hpp"
#include "rpo/url.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rpo {

// Declaration order is the order techniques are tried in.
enum class MutationTechnique {
    PathParamSimple,
    PathParamSlash,
    PathParamSemicolon,
    EncodedPath,
    EncodedQuery,
    Cookie,
};

inline constexpr std::array<MutationTechnique, 6> all_techniques {
    MutationTechnique::PathParamSimple,
    MutationTechnique::PathParamSlash,
    MutationTechnique::PathParamSemicolon,
    MutationTechnique::EncodedPath,
    MutationTechnique::EncodedQuery,
    MutationTechnique::Cookie,
};

inline std::string_view technique_name(MutationTechnique technique)
{
    switch (technique) {
    case MutationTechnique::PathParamSimple:
        return "PathParamSimple";
    case MutationTechnique::PathParamSlash:
        return "PathParamSlash";
    case MutationTechnique::PathParamSemicolon:
        return "PathParamSemicolon";
    case MutationTechnique::EncodedPath:
        return "EncodedPath";
    case MutationTechnique::EncodedQuery:
        return "EncodedQuery";
    case MutationTechnique::Cookie:
        return "Cookie";
    }
    return "?";
}

inline MutationTechnique parse_technique(std::string_view name)
{
    for (auto technique : all_techniques) {
        if (technique_name(technique) == name)
            return technique;
    }
    throw InvalidArgument("unknown technique: " + std::string(name));
}

using CookieJar = std::map<std::string, std::string>;

inline std::string serialize_cookies(const CookieJar& cookies)
{
    std::string out;
    for (const auto& [name, value] : cookies) {
        if (!out.empty())
            out += "; ";
        out += name + "=" + value;
    }
    return out;
}

inline CookieJar parse_cookie_header(std::string_view header)
{
    CookieJar jar;
    for (const auto& part : detail::split(header, ';')) {
        auto item = detail::trim(part);
        if (item.empty())
            continue;
        auto eq = item.find('=');
        if (eq == std::string_view::npos)
            jar[std::string(item)] = "";
        else
            jar[std::string(detail::trim(item.substr(0, eq)))] = std::string(detail::trim(item.substr(eq + 1)));
    }
    return jar;
}

struct MutatedRequest {
    WebUrl url;
    // Cookies to send with the page and its stylesheet fetches.
    CookieJar cookies;
    MutationTechnique technique;
    // URL-encoded payload text as injected.
    std::string payload;
    int slash_padding = 0;
};

inline constexpr int default_slash_padding = 20;

namespace detail {

inline bool has_script_extension(std::string_view segment)
{
    auto name = segment.substr(0, segment.find(';'));
    for (std::string_view ext : { ".php", ".asp", ".aspx", ".jsp", ".html", ".htm" }) {
        if (iends_with(name, ext))
            return true;
    }
    return false;
}

inline std::optional<std::size_t> script_segment_index(const WebUrl& url)
{
    std::optional<std::size_t> index;
    for (std::size_t i = 0; i < url.path_segments.size(); ++i) {
        if (has_script_extension(url.path_segments[i]))
            index = i;
    }
    return index;
}

inline bool has_slash_parameters(const WebUrl& url)
{
    auto script = script_segment_index(url);
    if (!script)
        return false;
    for (auto i = *script + 1; i < url.path_segments.size(); ++i) {
        if (!url.path_segments[i].empty())
            return true;
    }
    return false;
}

inline bool has_semicolon_parameters(const WebUrl& url)
{
    for (const auto& segment : url.path_segments) {
        if (segment.find(';') != std::string::npos)
            return true;
    }
    return false;
}

inline void drop_trailing_empty(std::vector<std::string>& segments)
{
    if (segments.size() > 1 && segments.back().empty())
        segments.pop_back();
}

inline void append_padding(WebUrl& url, int slash_padding)
{
    for (int i = 0; i < slash_padding; ++i)
        url.path_segments.emplace_back();
}

// Depth the decoding server descends into when it splits the decoded payload
// on '/', i.e. how many "%2F.." steps climb back out of it.
inline std::size_t server_depth_of(std::string_view encoded_payload)
{
    std::size_t depth = 0;
    for (const auto& segment : split(percent_decode(encoded_payload), '/')) {
        if (segment == ".")
            continue;
        if (segment == "..") {
            if (depth == 0)
                throw InvalidArgument("payload climbs above its insertion point");
            --depth;
            continue;
        }
        ++depth;
    }
    return depth;
}

} // namespace detail

inline std::vector<MutationTechnique> applicable_techniques(const WebUrl& url, const CookieJar& original_cookies)
{
    std::vector<MutationTechnique> out;
    out.push_back(MutationTechnique::PathParamSimple);
    if (detail::has_slash_parameters(url))
        out.push_back(MutationTechnique::PathParamSlash);
    if (detail::has_semicolon_parameters(url))
        out.push_back(MutationTechnique::PathParamSemicolon);
    out.push_back(MutationTechnique::EncodedPath);
    if (url.query && !url.query->empty())
        out.push_back(MutationTechnique::EncodedQuery);
    if (!original_cookies.empty())
        out.push_back(MutationTechnique::Cookie);
    return out;
}

inline bool is_applicable(MutationTechnique technique, const WebUrl& url, const CookieJar& cookies)
{
    for (auto t : applicable_techniques(url, cookies)) {
        if (t == technique)
            return true;
    }
    return false;
}

// `payload` is the URL-encoded text to inject (a reflection or exploit payload).
inline MutatedRequest mutate(const WebUrl& url, MutationTechnique technique, std::string_view payload,
    int slash_padding = default_slash_padding, const CookieJar& cookies = {})
{
    if (!is_applicable(technique, url, cookies))
        throw TechniqueNotApplicable(std::string(technique_name(technique)) + " does not apply to " + url.serialize());
    if (slash_padding < 0)
        throw InvalidArgument("slash_padding must not be negative");

    MutatedRequest out { url, cookies, technique, std::string(payload), slash_padding };
    WebUrl& mutated = out.url;
    mutated.fragment.reset();
    auto& segments = mutated.path_segments;
    const std::string p(payload);

    switch (technique) {
    case MutationTechnique::PathParamSimple:
        detail::drop_trailing_empty(segments);
        if (segments.size() == 1 && segments.front().empty())
            segments.front() = p;
        else
            segments.push_back(p);
        detail::append_padding(mutated, slash_padding);
        break;

    case MutationTechnique::PathParamSlash: {
        auto script = *detail::script_segment_index(url);
        detail::drop_trailing_empty(segments);
        for (auto i = script + 1; i < segments.size(); ++i) {
            if (!segments[i].empty())
                segments[i] = p + segments[i];
        }
        detail::append_padding(mutated, slash_padding);
        break;
    }

    case MutationTechnique::PathParamSemicolon:
        for (auto& segment : segments) {
            auto parts = detail::split(segment, ';');
            if (parts.size() < 2)
                continue;
            for (std::size_t i = 1; i < parts.size(); ++i)
                parts[i] = p + parts[i];
            segment = detail::join(parts, ";");
        }
        detail::append_padding(mutated, slash_padding);
        break;

    case MutationTechnique::EncodedPath: {
        std::string climb;
        for (std::size_t i = detail::server_depth_of(p); i > 0; --i)
            climb += "%2F..";
        segments.back() = p + climb + "%2F" + segments.back();
        detail::append_padding(mutated, slash_padding);
        break;
    }

    case MutationTechnique::EncodedQuery: {
        auto parts = detail::split(*mutated.query, '&');
        for (auto& part : parts) {
            auto eq = part.find('=');
            if (eq != std::string::npos)
                part.insert(eq + 1, p);
        }
        segments.back() += "%3F" + detail::join(parts, "&");
        mutated.query.reset();
        detail::append_padding(mutated, slash_padding);
        break;
    }

    case MutationTechnique::Cookie:
        for (auto& [name, value] : out.cookies)
            value = p + value;
        detail::append_padding(mutated, slash_padding);
        break;
    }
    return out;
}

inline MutatedRequest mutate(const WebUrl& url, MutationTechnique technique, const ReflectionPayload& payload,
    int slash_padding = default_slash_padding, const CookieJar& cookies = {})
{
    return mutate(url, technique, std::string_view(payload.encoded_text), slash_padding, cookies);
}

inline std::vector<WebUrl> expand_stylesheet_targets(const MutatedRequest& mutated, const std::vector<std::string>& relative_refs)
{
    std::vector<WebUrl> out;
    std::set<std::string> seen;
    for (const auto& ref : relative_refs) {
        WebUrl target;
        try {
            target = resolve_relative(mutated.url, ref);
        } catch (const MalformedUrl&) {
            continue;
        }
        target.fragment.reset();
        if (seen.insert(target.serialize()).second)
            out.push_back(std::move(target));
    }
    return out;
}

} // namespace rpo
