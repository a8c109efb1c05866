#pragma once

// Per-engine behavior matrix. Profiles are data: the built-in set mirrors the
// browser versions the attack was measured against, and a profile file can
// replace it (see profiles/default.json for the format).

#include "rpo/detail/ascii.hpp"
#include "rpo/error.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpo {

enum class Engine {
    Chrome,
    Opera,
    Safari,
    Firefox,
    Edge,
    InternetExplorer,
};

inline constexpr std::array<Engine, 6> all_engines {
    Engine::Chrome, Engine::Opera, Engine::Safari, Engine::Firefox, Engine::Edge, Engine::InternetExplorer
};

inline std::string_view engine_name(Engine engine)
{
    switch (engine) {
    case Engine::Chrome:
        return "Chrome";
    case Engine::Opera:
        return "Opera";
    case Engine::Safari:
        return "Safari";
    case Engine::Firefox:
        return "Firefox";
    case Engine::Edge:
        return "Edge";
    case Engine::InternetExplorer:
        return "InternetExplorer";
    }
    return "?";
}

inline std::optional<Engine> find_engine(std::string_view name)
{
    for (auto engine : all_engines) {
        if (detail::iequals(engine_name(engine), name))
            return engine;
    }
    if (detail::iequals(name, "ie"))
        return Engine::InternetExplorer;
    return std::nullopt;
}

// Public/system identifier tests that put a document into quirks mode.
struct QuirksRules {
    std::vector<std::string> public_id_exact;
    std::vector<std::string> public_id_prefixes;
    // Only quirks when the doctype has no system identifier.
    std::vector<std::string> public_id_prefixes_without_system_id;
    std::vector<std::string> system_id_exact;

    friend bool operator==(const QuirksRules&, const QuirksRules&) = default;
};

struct BrowserProfile {
    Engine engine = Engine::Chrome;
    std::string version;
    bool respects_nosniff = false;
    bool supports_frame_override = false;
    bool honors_frame_ancestors = true;
    bool base_tag_effective = true;
    std::string rule_set;
    QuirksRules rules;
    // Public identifiers this engine treats differently from its rule set.
    std::vector<std::string> quirks_exceptions;
    std::vector<std::string> standards_exceptions;

    friend bool operator==(const BrowserProfile&, const BrowserProfile&) = default;
};

inline QuirksRules html_quirks_rules()
{
    QuirksRules rules;
    rules.public_id_exact = {
        "-//W3O//DTD W3 HTML Strict 3.0//EN//",
        "-/W3C/DTD HTML 4.0 Transitional/EN",
        "HTML",
    };
    rules.system_id_exact = {
        "http://www.ibm.com/data/dtd/v11/ibmxhtml1-transitional.dtd",
    };
    rules.public_id_prefixes_without_system_id = {
        "-//W3C//DTD HTML 4.01 Frameset//",
        "-//W3C//DTD HTML 4.01 Transitional//",
    };
    rules.public_id_prefixes = {
        "+//Silmaril//dtd html Pro v0r11 19970101//",
        "-//AS//DTD HTML 3.0 asWedit + extensions//",
        "-//AdvaSoft Ltd//DTD HTML 3.0 asWedit + extensions//",
        "-//IETF//DTD HTML 2.0 Level 1//",
        "-//IETF//DTD HTML 2.0 Level 2//",
        "-//IETF//DTD HTML 2.0 Strict Level 1//",
        "-//IETF//DTD HTML 2.0 Strict Level 2//",
        "-//IETF//DTD HTML 2.0 Strict//",
        "-//IETF//DTD HTML 2.0//",
        "-//IETF//DTD HTML 2.1E//",
        "-//IETF//DTD HTML 3.0//",
        "-//IETF//DTD HTML 3.2 Final//",
        "-//IETF//DTD HTML 3.2//",
        "-//IETF//DTD HTML 3//",
        "-//IETF//DTD HTML Level 0//",
        "-//IETF//DTD HTML Level 1//",
        "-//IETF//DTD HTML Level 2//",
        "-//IETF//DTD HTML Level 3//",
        "-//IETF//DTD HTML Strict Level 0//",
        "-//IETF//DTD HTML Strict Level 1//",
        "-//IETF//DTD HTML Strict Level 2//",
        "-//IETF//DTD HTML Strict Level 3//",
        "-//IETF//DTD HTML Strict//",
        "-//IETF//DTD HTML//",
        "-//Metrius//DTD Metrius Presentational//",
        "-//Microsoft//DTD Internet Explorer 2.0 HTML Strict//",
        "-//Microsoft//DTD Internet Explorer 2.0 HTML//",
        "-//Microsoft//DTD Internet Explorer 2.0 Tables//",
        "-//Microsoft//DTD Internet Explorer 3.0 HTML Strict//",
        "-//Microsoft//DTD Internet Explorer 3.0 HTML//",
        "-//Microsoft//DTD Internet Explorer 3.0 Tables//",
        "-//Netscape Comm. Corp.//DTD HTML//",
        "-//Netscape Comm. Corp.//DTD Strict HTML//",
        "-//O'Reilly and Associates//DTD HTML 2.0//",
        "-//O'Reilly and Associates//DTD HTML Extended 1.0//",
        "-//O'Reilly and Associates//DTD HTML Extended Relaxed 1.0//",
        "-//SQ//DTD HTML 2.0 HoTMetaL + extensions//",
        "-//SoftQuad Software//DTD HoTMetaL PRO 6.0::19990601::extensions to HTML 4.0//",
        "-//SoftQuad//DTD HoTMetaL PRO 4.0::19971010::extensions to HTML 4.0//",
        "-//Spyglass//DTD HTML 2.0 Extended//",
        "-//Sun Microsystems Corp.//DTD HotJava HTML//",
        "-//Sun Microsystems Corp.//DTD HotJava Strict HTML//",
        "-//W3C//DTD HTML 3 1995-03-24//",
        "-//W3C//DTD HTML 3.2 Draft//",
        "-//W3C//DTD HTML 3.2 Final//",
        "-//W3C//DTD HTML 3.2//",
        "-//W3C//DTD HTML 3.2S Draft//",
        "-//W3C//DTD HTML 4.0 Frameset//",
        "-//W3C//DTD HTML 4.0 Transitional//",
        "-//W3C//DTD HTML Experimental 19960712//",
        "-//W3C//DTD HTML Experimental 970421//",
        "-//W3C//DTD W3 HTML//",
        "-//W3O//DTD W3 HTML 3.0//",
        "-//WebTechs//DTD Mozilla HTML 2.0//",
        "-//WebTechs//DTD Mozilla HTML//",
    };
    return rules;
}

inline BrowserProfile make_profile(Engine engine)
{
    BrowserProfile profile;
    profile.engine = engine;
    profile.rule_set = "html-quirks";
    profile.rules = html_quirks_rules();
    switch (engine) {
    case Engine::Chrome:
        profile.version = "55";
        break;
    case Engine::Opera:
        profile.version = "42";
        break;
    case Engine::Safari:
        profile.version = "10";
        break;
    case Engine::Firefox:
        profile.version = "50";
        profile.respects_nosniff = true;
        break;
    case Engine::Edge:
        profile.version = "38";
        profile.respects_nosniff = true;
        break;
    case Engine::InternetExplorer:
        profile.version = "11";
        profile.respects_nosniff = true;
        profile.supports_frame_override = true;
        profile.honors_frame_ancestors = false;
        profile.base_tag_effective = false;
        break;
    }
    return profile;
}

inline std::vector<BrowserProfile> default_profiles()
{
    std::vector<BrowserProfile> out;
    for (auto engine : all_engines)
        out.push_back(make_profile(engine));
    return out;
}

inline const BrowserProfile& profile_for(const std::vector<BrowserProfile>& profiles, Engine engine)
{
    for (const auto& p : profiles) {
        if (p.engine == engine)
            return p;
    }
    throw InvalidArgument("no profile for engine " + std::string(engine_name(engine)));
}

// Profile file (JSON):
//   { "rule_sets": { "<name>": { "public_id_exact": [...], "public_id_prefixes": [...],
//                                "public_id_prefixes_without_system_id": [...],
//                                "system_id_exact": [...] } },
//     "profiles": [ { "engine": "Chrome", "version": "55", "rule_set": "<name>",
//                     "respects_nosniff": false, "supports_frame_override": false,
//                     "honors_frame_ancestors": true, "base_tag_effective": true,
//                     "quirks_exceptions": [], "standards_exceptions": [] } ] }
namespace detail {

inline const nlohmann::json& require(const nlohmann::json& object, const char* key, nlohmann::json::value_t type, std::string_view where)
{
    auto it = object.find(key);
    if (it == object.end())
        throw ConfigError(std::string(where) + ": missing field '" + key + "'");
    bool ok = it->type() == type || (type == nlohmann::json::value_t::number_integer && it->is_number_integer());
    if (!ok)
        throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
    return *it;
}

inline std::vector<std::string> string_list(const nlohmann::json& object, const char* key, std::string_view where, bool optional = false)
{
    if (optional && !object.contains(key))
        return {};
    const auto& array = require(object, key, nlohmann::json::value_t::array, where);
    std::vector<std::string> out;
    for (const auto& item : array) {
        if (!item.is_string())
            throw ConfigError(std::string(where) + ": '" + key + "' must contain strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

} // namespace detail

inline nlohmann::json to_json(const QuirksRules& rules)
{
    return {
        { "public_id_exact", rules.public_id_exact },
        { "public_id_prefixes", rules.public_id_prefixes },
        { "public_id_prefixes_without_system_id", rules.public_id_prefixes_without_system_id },
        { "system_id_exact", rules.system_id_exact },
    };
}

inline nlohmann::json profiles_to_json(const std::vector<BrowserProfile>& profiles)
{
    nlohmann::json doc;
    doc["rule_sets"] = nlohmann::json::object();
    doc["profiles"] = nlohmann::json::array();
    for (const auto& p : profiles) {
        doc["rule_sets"][p.rule_set] = to_json(p.rules);
        doc["profiles"].push_back({
            { "engine", engine_name(p.engine) },
            { "version", p.version },
            { "rule_set", p.rule_set },
            { "respects_nosniff", p.respects_nosniff },
            { "supports_frame_override", p.supports_frame_override },
            { "honors_frame_ancestors", p.honors_frame_ancestors },
            { "base_tag_effective", p.base_tag_effective },
            { "quirks_exceptions", p.quirks_exceptions },
            { "standards_exceptions", p.standards_exceptions },
        });
    }
    return doc;
}

inline std::vector<BrowserProfile> profiles_from_json(const nlohmann::json& doc)
{
    using vt = nlohmann::json::value_t;
    if (!doc.is_object())
        throw ConfigError("profile file: top level must be an object");
    std::map<std::string, QuirksRules> rule_sets;
    for (const auto& [name, body] : detail::require(doc, "rule_sets", vt::object, "profile file").items()) {
        auto where = "rule set '" + name + "'";
        if (!body.is_object())
            throw ConfigError(where + ": must be an object");
        rule_sets[name] = QuirksRules {
            detail::string_list(body, "public_id_exact", where),
            detail::string_list(body, "public_id_prefixes", where),
            detail::string_list(body, "public_id_prefixes_without_system_id", where),
            detail::string_list(body, "system_id_exact", where),
        };
    }
    std::vector<BrowserProfile> out;
    for (const auto& item : detail::require(doc, "profiles", vt::array, "profile file")) {
        if (!item.is_object())
            throw ConfigError("profile entries must be objects");
        const auto& engine_text = detail::require(item, "engine", vt::string, "profile").get<std::string>();
        auto engine = find_engine(engine_text);
        if (!engine)
            throw ConfigError("unknown engine '" + engine_text + "'");
        auto where = "profile '" + engine_text + "'";
        BrowserProfile p;
        p.engine = *engine;
        p.version = item.value("version", "");
        p.rule_set = detail::require(item, "rule_set", vt::string, where).get<std::string>();
        auto rules = rule_sets.find(p.rule_set);
        if (rules == rule_sets.end())
            throw ConfigError(where + ": unknown rule set '" + p.rule_set + "'");
        p.rules = rules->second;
        p.respects_nosniff = detail::require(item, "respects_nosniff", vt::boolean, where).get<bool>();
        p.supports_frame_override = detail::require(item, "supports_frame_override", vt::boolean, where).get<bool>();
        p.honors_frame_ancestors = detail::require(item, "honors_frame_ancestors", vt::boolean, where).get<bool>();
        p.base_tag_effective = detail::require(item, "base_tag_effective", vt::boolean, where).get<bool>();
        p.quirks_exceptions = detail::string_list(item, "quirks_exceptions", where, true);
        p.standards_exceptions = detail::string_list(item, "standards_exceptions", where, true);
        for (const auto& existing : out) {
            if (existing.engine == p.engine)
                throw ConfigError(where + ": duplicate engine");
        }
        out.push_back(std::move(p));
    }
    if (out.empty())
        throw ConfigError("profile file lists no profiles");
    return out;
}

inline std::vector<BrowserProfile> load_profiles(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open profile file " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("profile file " + path + ": " + e.what());
    }
    return profiles_from_json(doc);
}

} // namespace rpo
