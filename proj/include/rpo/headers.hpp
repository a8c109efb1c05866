#pragma once

#include "rpo/detail/ascii.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rpo {

// Ordered header list; lookups are case-insensitive and repeated fields are
// joined with ", " as HTTP permits.
class HeaderList {
public:
    HeaderList() = default;
    HeaderList(std::initializer_list<std::pair<std::string, std::string>> init)
        : m_fields(init)
    {
    }

    void add(std::string name, std::string value) { m_fields.emplace_back(std::move(name), std::move(value)); }

    void set(std::string_view name, std::string value)
    {
        remove(name);
        add(std::string(name), std::move(value));
    }

    void remove(std::string_view name)
    {
        std::erase_if(m_fields, [&](const auto& field) { return detail::iequals(field.first, name); });
    }

    std::optional<std::string> get(std::string_view name) const
    {
        std::optional<std::string> out;
        for (const auto& [key, value] : m_fields) {
            if (!detail::iequals(key, name))
                continue;
            if (out)
                *out += ", " + value;
            else
                out = value;
        }
        return out;
    }

    bool contains(std::string_view name) const { return get(name).has_value(); }

    auto begin() const { return m_fields.begin(); }
    auto end() const { return m_fields.end(); }
    std::size_t size() const { return m_fields.size(); }

    friend bool operator==(const HeaderList&, const HeaderList&) = default;

private:
    std::vector<std::pair<std::string, std::string>> m_fields;
};

} // namespace rpo
