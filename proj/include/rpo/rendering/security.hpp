#pragma once

#include "rpo/detail/ascii.hpp"
#include "rpo/headers.hpp"

#include <optional>
#include <string>

namespace rpo {

// Response headers that gate stylesheet parsing and framing. Raw values are
// kept verbatim for audit output.
struct ResponseSecurity {
    std::optional<std::string> content_type;
    bool nosniff = false;
    std::optional<std::string> x_content_type_options;
    std::optional<std::string> x_frame_options;
    std::optional<std::string> x_ua_compatible;
    std::optional<std::string> content_security_policy;

    friend bool operator==(const ResponseSecurity&, const ResponseSecurity&) = default;
};

inline bool is_nosniff(std::string_view value)
{
    auto first = value.substr(0, value.find(','));
    return detail::iequals(detail::trim(first), "nosniff");
}

inline ResponseSecurity security_from_headers(const HeaderList& headers)
{
    ResponseSecurity out;
    out.content_type = headers.get("Content-Type");
    out.x_content_type_options = headers.get("X-Content-Type-Options");
    out.nosniff = out.x_content_type_options && is_nosniff(*out.x_content_type_options);
    out.x_frame_options = headers.get("X-Frame-Options");
    out.x_ua_compatible = headers.get("X-UA-Compatible");
    out.content_security_policy = headers.get("Content-Security-Policy");
    return out;
}

inline HeaderList security_to_headers(const ResponseSecurity& security)
{
    HeaderList headers;
    if (security.content_type)
        headers.add("Content-Type", *security.content_type);
    if (security.x_content_type_options)
        headers.add("X-Content-Type-Options", *security.x_content_type_options);
    else if (security.nosniff)
        headers.add("X-Content-Type-Options", "nosniff");
    if (security.x_frame_options)
        headers.add("X-Frame-Options", *security.x_frame_options);
    if (security.x_ua_compatible)
        headers.add("X-UA-Compatible", *security.x_ua_compatible);
    if (security.content_security_policy)
        headers.add("Content-Security-Policy", *security.content_security_policy);
    return headers;
}

inline bool is_css_content_type(const std::optional<std::string>& content_type)
{
    if (!content_type)
        return false;
    auto essence = detail::trim(std::string_view(*content_type).substr(0, content_type->find(';')));
    return detail::iequals(essence, "text/css");
}

} // namespace rpo
