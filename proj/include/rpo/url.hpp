#pragma once

// Browser-side and server-side views of the same URL.
//
// The browser treats the path as a list of raw, still-encoded segments: an
// encoded slash (%2F) is ordinary segment data. A decoding server (IIS style)
// sees the same bytes after one percent-decoding pass, where %2F becomes a
// separator and dot segments are collapsed afterwards. Relative path overwrite
// lives in the gap between the two.

#include "rpo/detail/ascii.hpp"
#include "rpo/error.hpp"

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpo {

struct WebUrl {
    std::string scheme;
    std::string host;
    std::optional<std::uint16_t> port;
    // Raw segments between slashes. "/" is {""}, "/a/" is {"a", ""}.
    std::vector<std::string> path_segments { "" };
    std::optional<std::string> query;
    std::optional<std::string> fragment;

    std::string path() const
    {
        std::string out;
        for (const auto& segment : path_segments) {
            out += '/';
            out += segment;
        }
        return out;
    }

    std::string authority() const
    {
        if (port)
            return host + ":" + std::to_string(*port);
        return host;
    }

    std::string origin() const { return scheme + "://" + authority(); }

    // Path plus query, as sent on the request line.
    std::string request_target() const
    {
        auto out = path();
        if (query) {
            out += '?';
            out += *query;
        }
        return out;
    }

    std::string serialize() const
    {
        auto out = origin() + request_target();
        if (fragment) {
            out += '#';
            out += *fragment;
        }
        return out;
    }

    friend bool operator==(const WebUrl&, const WebUrl&) = default;
};

struct ServerPath {
    std::string canonical_path;

    friend bool operator==(const ServerPath&, const ServerPath&) = default;
};

namespace detail {

inline bool is_unreserved(char c)
{
    return is_alnum(c) || c == '-' || c == '.' || c == '_' || c == '~';
}

// Bytes a browser would never put on the wire unencoded.
inline bool is_illegal_url_char(char c)
{
    auto u = static_cast<unsigned char>(c);
    return u <= 0x20 || u >= 0x7f || c == '"' || c == '<' || c == '>' || c == '\\';
}

inline void validate_component(std::string_view text, std::string_view what)
{
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (is_illegal_url_char(c))
            throw MalformedUrl("illegal character in " + std::string(what));
        if (c == '%') {
            if (i + 2 >= text.size() || !is_hex(text[i + 1]) || !is_hex(text[i + 2]))
                throw MalformedUrl("invalid percent escape in " + std::string(what));
        }
    }
}

inline bool is_dot(std::string_view s) { return s == "."; }
inline bool is_dot_dot(std::string_view s) { return s == ".."; }

// RFC 3986 dot-segment removal over a segment list; ".." clamps at root and a
// trailing dot segment leaves an empty final segment (a directory).
inline std::vector<std::string> remove_dot_segments(const std::vector<std::string>& input)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const bool last = i + 1 == input.size();
        const auto& segment = input[i];
        if (is_dot(segment)) {
            if (last)
                out.emplace_back();
        } else if (is_dot_dot(segment)) {
            if (!out.empty())
                out.pop_back();
            if (last)
                out.emplace_back();
        } else {
            out.push_back(segment);
        }
    }
    if (out.empty())
        out.emplace_back();
    return out;
}

inline std::vector<std::string> split_path(std::string_view path)
{
    // path starts with '/'
    if (path.empty() || path == "/")
        return { "" };
    return split(path.substr(1), '/');
}

inline bool has_scheme(std::string_view ref)
{
    if (ref.empty() || !is_alpha(ref.front()))
        return false;
    for (char c : ref) {
        if (c == ':')
            return true;
        if (!(is_alnum(c) || c == '+' || c == '-' || c == '.'))
            return false;
    }
    return false;
}

inline void validate_host(std::string_view host)
{
    if (host.empty())
        throw MalformedUrl("empty host");
    for (char c : host) {
        if (!(is_alnum(c) || c == '-' || c == '.'))
            throw MalformedUrl("illegal character in host");
    }
}

} // namespace detail

inline std::string percent_decode(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '%' && i + 2 < text.size() && detail::is_hex(text[i + 1]) && detail::is_hex(text[i + 2])) {
            out += static_cast<char>(detail::hex_value(text[i + 1]) * 16 + detail::hex_value(text[i + 2]));
            i += 2;
        } else {
            out += text[i];
        }
    }
    return out;
}

// Encodes every byte outside the RFC 3986 unreserved set.
inline std::string percent_encode(std::string_view text)
{
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(text.size() * 3);
    for (char c : text) {
        if (detail::is_unreserved(c)) {
            out += c;
        } else {
            auto u = static_cast<unsigned char>(c);
            out += '%';
            out += hex[u >> 4];
            out += hex[u & 0xf];
        }
    }
    return out;
}

inline WebUrl parse_url(std::string_view text)
{
    text = detail::trim(text);
    auto colon = text.find(':');
    if (colon == std::string_view::npos || !detail::has_scheme(text))
        throw MalformedUrl("missing scheme");
    WebUrl url;
    url.scheme = detail::lowercase(text.substr(0, colon));
    if (url.scheme != "http" && url.scheme != "https")
        throw MalformedUrl("unsupported scheme: " + url.scheme);
    auto rest = text.substr(colon + 1);
    if (rest.substr(0, 2) != "//")
        throw MalformedUrl("missing authority");
    rest.remove_prefix(2);

    auto authority_end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, authority_end);
    rest = authority_end == std::string_view::npos ? std::string_view {} : rest.substr(authority_end);
    if (authority.find('@') != std::string_view::npos)
        throw MalformedUrl("userinfo is not supported");

    auto port_colon = authority.rfind(':');
    auto host = authority.substr(0, port_colon);
    if (port_colon != std::string_view::npos) {
        auto port_text = authority.substr(port_colon + 1);
        if (!port_text.empty()) {
            unsigned value = 0;
            auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
            if (ec != std::errc {} || ptr != port_text.data() + port_text.size() || value == 0 || value > 65535)
                throw MalformedUrl("invalid port");
            const bool is_default = (url.scheme == "http" && value == 80) || (url.scheme == "https" && value == 443);
            if (!is_default)
                url.port = static_cast<std::uint16_t>(value);
        }
    }
    url.host = detail::lowercase(host);
    if (!url.host.empty() && url.host.back() == '.')
        url.host.pop_back();
    detail::validate_host(url.host);

    auto hash = rest.find('#');
    if (hash != std::string_view::npos) {
        url.fragment = std::string(rest.substr(hash + 1));
        detail::validate_component(*url.fragment, "fragment");
        rest = rest.substr(0, hash);
    }
    auto question = rest.find('?');
    if (question != std::string_view::npos) {
        url.query = std::string(rest.substr(question + 1));
        detail::validate_component(*url.query, "query");
        rest = rest.substr(0, question);
    }
    detail::validate_component(rest, "path");
    url.path_segments = detail::remove_dot_segments(detail::split_path(rest.empty() ? "/" : rest));
    return url;
}

inline WebUrl resolve_relative(const WebUrl& base, std::string_view reference)
{
    reference = detail::trim(reference);
    if (detail::has_scheme(reference))
        return parse_url(reference);
    if (reference.substr(0, 2) == "//")
        return parse_url(base.scheme + ":" + std::string(reference));

    WebUrl result = base;
    result.fragment.reset();

    auto hash = reference.find('#');
    if (hash != std::string_view::npos) {
        result.fragment = std::string(reference.substr(hash + 1));
        detail::validate_component(*result.fragment, "fragment");
        reference = reference.substr(0, hash);
    }
    std::optional<std::string> query;
    auto question = reference.find('?');
    if (question != std::string_view::npos) {
        query = std::string(reference.substr(question + 1));
        detail::validate_component(*query, "query");
        reference = reference.substr(0, question);
    }
    detail::validate_component(reference, "path");

    if (reference.empty()) {
        if (query)
            result.query = query;
        return result;
    }
    result.query = query;
    if (reference.front() == '/') {
        result.path_segments = detail::remove_dot_segments(detail::split_path(reference));
        return result;
    }
    std::vector<std::string> merged(base.path_segments.begin(), base.path_segments.end() - 1);
    for (auto& segment : detail::split(reference, '/'))
        merged.push_back(std::move(segment));
    result.path_segments = detail::remove_dot_segments(merged);
    return result;
}

// Canonicalizes an already-decoded path: dot segments removed, then empty
// segments collapsed. Never decodes.
inline ServerPath canonicalize_decoded_path(std::string_view decoded)
{
    auto segments = detail::remove_dot_segments(detail::split_path(decoded.empty() ? "/" : decoded));
    std::string out;
    for (const auto& segment : segments) {
        if (segment.empty())
            continue;
        out += '/';
        out += segment;
    }
    if (out.empty())
        out = "/";
    return { out };
}

// Server view of a raw request path: exactly one decoding pass.
inline ServerPath server_view(std::string_view raw_path)
{
    return canonicalize_decoded_path(percent_decode(raw_path));
}

inline ServerPath server_view(const WebUrl& url)
{
    return server_view(url.path());
}

// Re-encodes a canonical path so that server_view maps it back to itself.
inline std::string encode_server_path(const ServerPath& path)
{
    if (path.canonical_path == "/")
        return "/";
    std::string out;
    for (const auto& segment : detail::split_path(path.canonical_path)) {
        out += '/';
        out += percent_encode(segment);
    }
    return out;
}

inline std::string browser_base_directory(const WebUrl& url)
{
    std::string out = "/";
    for (std::size_t i = 0; i + 1 < url.path_segments.size(); ++i) {
        out += url.path_segments[i];
        out += '/';
    }
    return out;
}

} // namespace rpo
