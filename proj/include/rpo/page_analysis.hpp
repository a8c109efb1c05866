#pragma once

// Tolerant extraction of the few HTML facts the scanner needs. This is not a
// tree builder: it walks tags in source order, skips raw-text elements, never
// looks inside frames, and records byte offsets of the tags it cares about.

#include "rpo/detail/ascii.hpp"
#include "rpo/url.hpp"

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rpo {

struct StylesheetRef {
    std::string href;
    bool relative = false;
    std::size_t offset = 0;
};

struct BaseTag {
    std::string href;
    std::size_t offset = 0;
};

struct PageDocument {
    std::optional<std::string> doctype;
    std::optional<BaseTag> base;
    std::vector<StylesheetRef> stylesheet_refs;
    // <meta http-equiv="X-UA-Compatible" content=...>, the in-document
    // equivalent of the header.
    std::optional<std::string> meta_x_ua_compatible;

    std::vector<std::string> relative_hrefs() const
    {
        std::vector<std::string> out;
        for (const auto& ref : stylesheet_refs) {
            if (ref.relative)
                out.push_back(ref.href);
        }
        return out;
    }
};

// Root-relative and scheme-relative references cannot be overwritten.
inline bool is_relative_reference(std::string_view href)
{
    href = detail::trim(href);
    if (detail::has_scheme(href))
        return false;
    return href.empty() || href.front() != '/';
}

namespace detail {

struct Tag {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::size_t offset = 0;

    const std::string* attribute(std::string_view key) const
    {
        for (const auto& [k, v] : attributes) {
            if (k == key)
                return &v;
        }
        return nullptr;
    }
};

inline std::string decode_entities(std::string_view text)
{
    static const std::map<std::string, std::string, std::less<>> named {
        { "amp", "&" }, { "lt", "<" }, { "gt", ">" }, { "quot", "\"" }, { "apos", "'" }, { "nbsp", "\xC2\xA0" }
    };
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out += text[i];
            continue;
        }
        auto semi = text.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out += text[i];
            continue;
        }
        auto entity = text.substr(i + 1, semi - i - 1);
        if (!entity.empty() && entity.front() == '#') {
            unsigned long code = 0;
            bool ok = entity.size() > 1;
            bool hex = ok && (entity[1] == 'x' || entity[1] == 'X');
            for (auto c : entity.substr(hex ? 2 : 1)) {
                if (hex ? !is_hex(c) : !is_digit(c)) {
                    ok = false;
                    break;
                }
                code = code * (hex ? 16 : 10) + static_cast<unsigned long>(hex_value(c));
            }
            if (ok && code > 0 && code < 0x80) {
                out += static_cast<char>(code);
                i = semi;
                continue;
            }
        } else if (auto it = named.find(lowercase(entity)); it != named.end()) {
            out += it->second;
            i = semi;
            continue;
        }
        out += text[i];
    }
    return out;
}

// Parses a start tag beginning at body[pos] == '<'. Returns the tag and the
// offset just past its closing '>' (or end of input).
inline std::pair<Tag, std::size_t> parse_start_tag(std::string_view body, std::size_t pos)
{
    Tag tag;
    tag.offset = pos;
    std::size_t i = pos + 1;
    while (i < body.size() && !is_space(body[i]) && body[i] != '>' && body[i] != '/')
        tag.name += to_lower(body[i++]);

    while (i < body.size()) {
        while (i < body.size() && (is_space(body[i]) || body[i] == '/'))
            ++i;
        if (i >= body.size())
            break;
        if (body[i] == '>')
            return { std::move(tag), i + 1 };
        std::string key;
        while (i < body.size() && !is_space(body[i]) && body[i] != '>' && body[i] != '=' && !(body[i] == '/' && !key.empty()))
            key += to_lower(body[i++]);
        while (i < body.size() && is_space(body[i]))
            ++i;
        std::string value;
        if (i < body.size() && body[i] == '=') {
            ++i;
            while (i < body.size() && is_space(body[i]))
                ++i;
            if (i < body.size() && (body[i] == '"' || body[i] == '\'')) {
                char quote = body[i++];
                auto end = body.find(quote, i);
                if (end == std::string_view::npos)
                    end = body.size();
                value = std::string(body.substr(i, end - i));
                i = end + 1;
            } else {
                while (i < body.size() && !is_space(body[i]) && body[i] != '>')
                    value += body[i++];
            }
        }
        if (!key.empty())
            tag.attributes.emplace_back(std::move(key), decode_entities(value));
    }
    return { std::move(tag), body.size() };
}

inline std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from)
{
    for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
        if (iequals(haystack.substr(i, needle.size()), needle))
            return i;
    }
    return std::string_view::npos;
}

inline bool has_token(std::string_view list, std::string_view token)
{
    std::size_t i = 0;
    while (i < list.size()) {
        while (i < list.size() && is_space(list[i]))
            ++i;
        auto start = i;
        while (i < list.size() && !is_space(list[i]))
            ++i;
        if (i > start && iequals(list.substr(start, i - start), token))
            return true;
    }
    return false;
}

inline bool is_raw_text_element(std::string_view name)
{
    // iframe and noframes content is fallback markup, never the framed page.
    for (std::string_view raw : { "script", "style", "textarea", "title", "xmp", "iframe", "noembed", "noframes", "plaintext" }) {
        if (name == raw)
            return true;
    }
    return false;
}

} // namespace detail

inline PageDocument analyze_html(std::string_view body)
{
    PageDocument doc;
    bool seen_element = false;
    std::size_t i = 0;
    if (body.substr(0, 3) == "\xEF\xBB\xBF")
        i = 3;

    while (i < body.size()) {
        auto lt = body.find('<', i);
        if (lt == std::string_view::npos)
            break;
        i = lt;
        auto rest = body.substr(i);

        if (rest.substr(0, 4) == "<!--") {
            auto end = body.find("-->", i + 4);
            i = end == std::string_view::npos ? body.size() : end + 3;
            continue;
        }
        if (rest.size() > 1 && (rest[1] == '!' || rest[1] == '?')) {
            auto end = body.find('>', i);
            auto stop = end == std::string_view::npos ? body.size() : end + 1;
            if (detail::istarts_with(rest, "<!doctype") && !seen_element && !doc.doctype)
                doc.doctype = std::string(body.substr(i, stop - i));
            i = stop;
            continue;
        }
        if (rest.size() > 1 && rest[1] == '/') {
            auto end = body.find('>', i);
            i = end == std::string_view::npos ? body.size() : end + 1;
            continue;
        }
        if (rest.size() < 2 || !detail::is_alpha(rest[1])) {
            ++i;
            continue;
        }

        auto [tag, next] = detail::parse_start_tag(body, i);
        i = next;
        seen_element = true;

        if (tag.name == "link") {
            auto rel = tag.attribute("rel");
            auto href = tag.attribute("href");
            if (rel && href && detail::has_token(*rel, "stylesheet")) {
                auto trimmed = std::string(detail::trim(*href));
                doc.stylesheet_refs.push_back({ trimmed, is_relative_reference(trimmed), tag.offset });
            }
        } else if (tag.name == "base") {
            if (auto href = tag.attribute("href"); href && !doc.base)
                doc.base = BaseTag { std::string(detail::trim(*href)), tag.offset };
        } else if (tag.name == "meta") {
            auto equiv = tag.attribute("http-equiv");
            auto content = tag.attribute("content");
            if (equiv && content && detail::iequals(detail::trim(*equiv), "x-ua-compatible") && !doc.meta_x_ua_compatible)
                doc.meta_x_ua_compatible = *content;
        } else if (detail::is_raw_text_element(tag.name)) {
            auto close = detail::find_ci(body, "</" + tag.name, i);
            if (close == std::string_view::npos) {
                i = body.size();
            } else {
                auto end = body.find('>', close);
                i = end == std::string_view::npos ? body.size() : end + 1;
            }
        }
    }
    return doc;
}

inline bool has_blocking_base(const PageDocument& doc)
{
    if (!doc.base)
        return false;
    for (const auto& ref : doc.stylesheet_refs) {
        if (ref.relative)
            return doc.base->offset < ref.offset;
    }
    return true;
}

struct UrlTemplate {
    std::string abstract_url;
    std::optional<std::string> doctype_key;

    friend auto operator<=>(const UrlTemplate&, const UrlTemplate&) = default;
    friend bool operator==(const UrlTemplate&, const UrlTemplate&) = default;
};

namespace detail {

inline constexpr std::size_t min_digit_run = 3;

inline std::string abstract_segment(std::string_view segment)
{
    if (!segment.empty() && std::all_of(segment.begin(), segment.end(), is_digit))
        return "*";
    std::string out;
    std::size_t i = 0;
    while (i < segment.size()) {
        // escapes are opaque; %20 is not a digit run
        if (segment[i] == '%' && i + 2 < segment.size() && is_hex(segment[i + 1]) && is_hex(segment[i + 2])) {
            out += segment.substr(i, 3);
            i += 3;
            continue;
        }
        if (!is_digit(segment[i])) {
            out += segment[i++];
            continue;
        }
        auto start = i;
        while (i < segment.size() && is_digit(segment[i]))
            ++i;
        if (i - start >= min_digit_run)
            out += '*';
        else
            out += segment.substr(start, i - start);
    }
    return out;
}

} // namespace detail

inline UrlTemplate abstract_url(const WebUrl& url)
{
    std::string out = url.authority();
    for (const auto& segment : url.path_segments) {
        out += '/';
        out += detail::abstract_segment(segment);
    }
    if (url.query) {
        std::vector<std::string> parts;
        for (auto& part : detail::split(*url.query, '&')) {
            auto eq = part.find('=');
            parts.push_back(eq == std::string::npos ? part : part.substr(0, eq + 1) + "*");
        }
        out += "?" + detail::join(parts, "&");
    }
    return { out, std::nullopt };
}

// Normalized doctype used as a grouping key.
inline std::optional<std::string> doctype_key(const std::optional<std::string>& doctype)
{
    if (!doctype)
        return std::nullopt;
    std::string out;
    bool pending_space = false;
    for (char c : detail::trim(*doctype)) {
        if (detail::is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty())
            out += ' ';
        pending_space = false;
        out += detail::to_lower(c);
    }
    return out;
}

struct CandidatePage {
    WebUrl url;
    std::optional<std::string> doctype;
};

inline UrlTemplate template_of(const CandidatePage& page)
{
    auto t = abstract_url(page.url);
    t.doctype_key = doctype_key(page.doctype);
    return t;
}

inline std::map<UrlTemplate, WebUrl> group_candidates(const std::vector<CandidatePage>& pages)
{
    std::map<UrlTemplate, WebUrl> groups;
    for (const auto& page : pages) {
        auto key = template_of(page);
        auto it = groups.find(key);
        if (it == groups.end())
            groups.emplace(std::move(key), page.url);
        else if (page.url.serialize() < it->second.serialize())
            it->second = page.url;
    }
    return groups;
}

} // namespace rpo
