#pragma once

// Configurable victim site. Each configuration picks how the server maps
// request paths to the page, which request parts it echoes into the body,
// and which defenses it sets. handle_request is a pure function of the
// configuration and the request.

#include "rpo/detail/ascii.hpp"
#include "rpo/error.hpp"
#include "rpo/headers.hpp"
#include "rpo/http.hpp"
#include "rpo/mutation.hpp"
#include "rpo/rendering.hpp"
#include "rpo/scanner.hpp"
#include "rpo/url.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rpo::mock {

enum class Routing {
    // Only the exact page path is served.
    ExactFile,
    // Anything below the script segment is served as the page (PATH_INFO).
    PathInfoRewrite,
    // ";param" suffixes are ignored when matching, then PATH_INFO applies.
    SemicolonParams,
    // The path is decoded once (so %2F and %3F act as separators) and
    // canonicalized before matching, then PATH_INFO applies.
    EncodedSlashDecode,
};

enum class Sink {
    EchoUrl,
    EchoQueryValues,
    EchoCookieValues,
    EchoReferrer,
};

enum class Escaping {
    None,
    // Every byte that is not [A-Za-z0-9] becomes a numeric entity.
    HtmlEntities,
};

inline constexpr std::array<Routing, 4> all_routings { Routing::ExactFile, Routing::PathInfoRewrite, Routing::SemicolonParams,
    Routing::EncodedSlashDecode };
inline constexpr std::array<Sink, 4> all_sinks { Sink::EchoUrl, Sink::EchoQueryValues, Sink::EchoCookieValues, Sink::EchoReferrer };
inline constexpr std::array<Escaping, 2> all_escapings { Escaping::None, Escaping::HtmlEntities };

inline std::string_view routing_name(Routing r)
{
    switch (r) {
    case Routing::ExactFile:
        return "ExactFile";
    case Routing::PathInfoRewrite:
        return "PathInfoRewrite";
    case Routing::SemicolonParams:
        return "SemicolonParams";
    case Routing::EncodedSlashDecode:
        return "EncodedSlashDecode";
    }
    return "?";
}

inline std::string_view sink_name(Sink s)
{
    switch (s) {
    case Sink::EchoUrl:
        return "EchoUrl";
    case Sink::EchoQueryValues:
        return "EchoQueryValues";
    case Sink::EchoCookieValues:
        return "EchoCookieValues";
    case Sink::EchoReferrer:
        return "EchoReferrer";
    }
    return "?";
}

inline std::string_view escaping_name(Escaping e)
{
    return e == Escaping::None ? "None" : "HtmlEntities";
}

struct TargetConfig {
    std::string name;
    Routing routing = Routing::PathInfoRewrite;
    // Raw path of the page, e.g. "/rpo/page.php".
    std::string page_path = "/rpo/page.php";
    std::set<Sink> sinks;
    Escaping escaping = Escaping::None;
    std::optional<std::string> doctype;
    bool emit_base_tag = false;
    ResponseSecurity headers { "text/html; charset=utf-8", false, std::nullopt, std::nullopt, std::nullopt, std::nullopt };
    std::vector<std::string> stylesheet_refs { "style.css" };
    bool error_page_echoes_url = false;
    // What a crawler would have seen on the page URL.
    std::optional<std::string> seed_query;
    CookieJar seed_cookies;

    friend bool operator==(const TargetConfig&, const TargetConfig&) = default;
};

struct GroundTruth {
    bool vulnerable = false;
    // Keyed like ScanVerdict::profile_results.
    std::map<std::string, bool> exploitable;
};

namespace detail {

using rpo::detail::is_alnum;

inline std::string escape(std::string_view text, Escaping escaping)
{
    if (escaping == Escaping::None)
        return std::string(text);
    std::string out;
    for (char c : text) {
        if (is_alnum(c))
            out += c;
        else
            out += "&#" + std::to_string(static_cast<unsigned char>(c)) + ";";
    }
    return out;
}

inline std::string strip_semicolon_params(std::string_view path)
{
    std::vector<std::string> out;
    for (auto& segment : rpo::detail::split(path, '/'))
        out.push_back(segment.substr(0, segment.find(';')));
    return rpo::detail::join(out, "/");
}

inline bool path_or_below(std::string_view path, std::string_view page)
{
    if (path == page)
        return true;
    return path.size() > page.size() && path.substr(0, page.size()) == page && path[page.size()] == '/';
}

// What the server application sees once routing is done.
struct Routed {
    bool served = false;
    // Query string as the application sees it (already split off the path).
    std::optional<std::string> query;
    bool query_decoded = false;
};

inline Routed route(const TargetConfig& config, std::string_view raw_path, const std::optional<std::string>& raw_query)
{
    Routed out;
    out.query = raw_query;
    switch (config.routing) {
    case Routing::ExactFile:
        out.served = raw_path == config.page_path;
        break;
    case Routing::PathInfoRewrite:
        out.served = path_or_below(raw_path, config.page_path);
        break;
    case Routing::SemicolonParams:
        out.served = path_or_below(strip_semicolon_params(raw_path), strip_semicolon_params(config.page_path));
        break;
    case Routing::EncodedSlashDecode: {
        auto decoded = percent_decode(raw_path);
        auto question = decoded.find('?');
        if (question != std::string::npos) {
            // A decoded %3F starts the query; a real query is appended to it.
            auto tail = decoded.substr(question + 1);
            if (raw_query)
                tail += "&" + percent_decode(*raw_query);
            out.query = tail;
            out.query_decoded = true;
            decoded.resize(question);
        }
        auto canonical = canonicalize_decoded_path(decoded).canonical_path;
        auto page = server_view(std::string_view(config.page_path)).canonical_path;
        out.served = path_or_below(canonical, page);
        break;
    }
    }
    return out;
}

inline std::vector<std::string> query_values(const std::optional<std::string>& query, bool already_decoded)
{
    std::vector<std::string> out;
    if (!query)
        return out;
    for (const auto& part : rpo::detail::split(*query, '&')) {
        auto eq = part.find('=');
        if (eq == std::string::npos)
            continue;
        auto value = part.substr(eq + 1);
        out.push_back(already_decoded ? value : percent_decode(value));
    }
    return out;
}

inline std::string page_template(const TargetConfig& config, std::string_view heading, const std::vector<std::string>& echoes)
{
    std::string out;
    if (config.doctype)
        out += *config.doctype + "\n";
    out += "<html>\n<head>\n<meta charset=\"utf-8\">\n";
    if (config.emit_base_tag)
        out += "<base href=\"" + browser_base_directory(parse_url("http://h" + config.page_path)) + "\">\n";
    out += "<title>" + config.name + "</title>\n";
    for (const auto& ref : config.stylesheet_refs)
        out += "<link rel=\"stylesheet\" href=\"" + ref + "\">\n";
    // Typical inline script; leaves three braces open for a CSS reader.
    out += "<script>\nfunction init() { if (window.ready) { var settings = {\n</script>\n";
    out += "</head>\n<body>\n<h1>" + std::string(heading) + "</h1>\n";
    for (const auto& echo : echoes)
        out += "<div class=\"echo\">" + echo + "</div>\n";
    out += "<p>Nothing else to see here.</p>\n</body>\n</html>\n";
    return out;
}

} // namespace detail

// `raw_target` is the request line target, undecoded. Set
// `header_values_decoded` when the listener already percent-decoded header
// values, so cookies and the referrer are decoded once either way.
inline HttpResponse handle_request(const TargetConfig& config, std::string_view method, std::string_view raw_target,
    const HeaderList& request_headers, bool header_values_decoded = false)
{
    auto header_text = [&](const std::string& value) { return header_values_decoded ? value : percent_decode(value); };
    HttpResponse response;
    response.headers = security_to_headers(config.headers);
    if (method != "GET" && method != "HEAD") {
        response.status = 405;
        response.headers.set("Allow", "GET, HEAD");
        response.headers.set("Content-Type", "text/plain");
        response.body = "method not allowed\n";
        return response;
    }

    auto target = raw_target.substr(0, raw_target.find('#'));
    auto question = target.find('?');
    auto raw_path = target.substr(0, question);
    std::optional<std::string> raw_query;
    if (question != std::string_view::npos)
        raw_query = std::string(target.substr(question + 1));

    auto routed = detail::route(config, raw_path, raw_query);
    std::vector<std::string> echoes;
    if (!routed.served) {
        response.status = 404;
        if (config.error_page_echoes_url)
            echoes.push_back(detail::escape("Not found: " + percent_decode(raw_path), config.escaping));
        response.body = detail::page_template(config, "Not Found", echoes);
        return response;
    }

    for (auto sink : config.sinks) {
        switch (sink) {
        case Sink::EchoUrl:
            echoes.push_back(detail::escape(percent_decode(target), config.escaping));
            break;
        case Sink::EchoQueryValues:
            for (const auto& value : detail::query_values(routed.query, routed.query_decoded))
                echoes.push_back(detail::escape(value, config.escaping));
            break;
        case Sink::EchoCookieValues:
            if (auto header = request_headers.get("Cookie")) {
                for (const auto& [name, value] : parse_cookie_header(*header))
                    echoes.push_back(detail::escape(header_text(value), config.escaping));
            }
            break;
        case Sink::EchoReferrer:
            if (auto referrer = request_headers.get("Referer"))
                echoes.push_back(detail::escape(header_text(*referrer), config.escaping));
            break;
        }
    }
    response.status = 200;
    response.body = detail::page_template(config, config.name, echoes);
    return response;
}

inline HttpResponse handle_request(const TargetConfig& config, const HttpRequest& request)
{
    auto headers = request.headers;
    if (!request.cookies.empty())
        headers.set("Cookie", serialize_cookies(request.cookies));
    auto response = handle_request(config, request.method, request.url.request_target(), headers);
    response.final_url = request.url;
    return response;
}

// In-process client over handle_request, for tests without sockets.
class DirectClient : public HttpClient {
public:
    explicit DirectClient(const TargetConfig& config)
        : m_config(config)
    {
    }

    HttpResponse get(const HttpRequest& request) override
    {
        require_get(request);
        return handle_request(m_config, request);
    }

private:
    const TargetConfig& m_config;
};

inline WebUrl page_url(const TargetConfig& config, std::string_view origin)
{
    auto text = std::string(origin) + config.page_path;
    if (config.seed_query)
        text += "?" + *config.seed_query;
    return parse_url(text);
}

// Labels derived from the configuration flags alone. Routing and sink
// behavior is restated here from the server's semantics rather than by
// running the server; rendering questions are answered by the rendering
// model.
inline GroundTruth compute_ground_truth(const TargetConfig& config, const std::vector<BrowserProfile>& profiles,
    std::string_view attacker_origin, std::string_view victim_origin)
{
    GroundTruth truth;
    bool has_relative = false;
    for (const auto& ref : config.stylesheet_refs)
        has_relative = has_relative || is_relative_reference(ref);

    auto url = page_url(config, "http://h");
    bool last_has_semicolon = url.path_segments.back().find(';') != std::string::npos;

    // Does the mutated stylesheet request still reach the page script?
    auto served = [&](MutationTechnique t) {
        switch (config.routing) {
        case Routing::ExactFile:
            return false;
        case Routing::PathInfoRewrite:
            return t == MutationTechnique::PathParamSimple || t == MutationTechnique::PathParamSlash
                || t == MutationTechnique::Cookie;
        case Routing::SemicolonParams:
            // An encoded query glued onto a ";param" is swallowed by the param.
            return t == MutationTechnique::PathParamSimple || t == MutationTechnique::PathParamSlash
                || t == MutationTechnique::PathParamSemicolon || t == MutationTechnique::Cookie
                || (t == MutationTechnique::EncodedQuery && last_has_semicolon);
        case Routing::EncodedSlashDecode:
            return t != MutationTechnique::PathParamSemicolon;
        }
        return false;
    };
    auto echoes = [&](MutationTechnique t) {
        if (t == MutationTechnique::Cookie)
            return config.sinks.count(Sink::EchoCookieValues) > 0;
        if (config.sinks.count(Sink::EchoUrl) || config.sinks.count(Sink::EchoReferrer))
            return true;
        // The stylesheet URL only carries a query when it was folded into the path
        // and the server splits it back out after decoding.
        return t == MutationTechnique::EncodedQuery && config.routing == Routing::EncodedSlashDecode
            && config.sinks.count(Sink::EchoQueryValues) > 0;
    };

    bool reflects = false;
    for (auto t : applicable_techniques(url, config.seed_cookies)) {
        if (served(t) ? echoes(t) : (config.error_page_echoes_url && t != MutationTechnique::Cookie))
            reflects = true;
    }
    truth.vulnerable = has_relative && !config.emit_base_tag && reflects;

    for (const auto& profile : profiles) {
        for (bool framed : { false, true }) {
            if (framed && !profile.supports_frame_override)
                continue;
            bool ok = truth.vulnerable && config.escaping == Escaping::None;
            if (framed) {
                ok = ok && framing_allowed(config.headers.x_frame_options, attacker_origin, victim_origin, profile);
                if (profile.honors_frame_ancestors)
                    ok = ok && frame_ancestors_allowed(config.headers.content_security_policy, attacker_origin, victim_origin);
            }
            auto mode = effective_mode(config.doctype, profile, framed, config.headers);
            ok = ok && stylesheet_accepted(profile, mode, config.headers);
            truth.exploitable[result_key(profile.engine, framed)] = ok;
        }
    }
    return truth;
}

// Config file format (JSON object, or an array of them under "targets"):
//   name, routing, page_path, sinks[], escaping, doctype|null, emit_base_tag,
//   headers{content_type, x_content_type_options, x_frame_options,
//   x_ua_compatible, content_security_policy}, stylesheet_refs[],
//   error_page_echoes_url, seed_query|null, seed_cookies{}
inline nlohmann::json to_json(const TargetConfig& c)
{
    auto opt = [](const std::optional<std::string>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json sinks = nlohmann::json::array();
    for (auto s : c.sinks)
        sinks.push_back(sink_name(s));
    return {
        { "name", c.name },
        { "routing", routing_name(c.routing) },
        { "page_path", c.page_path },
        { "sinks", sinks },
        { "escaping", escaping_name(c.escaping) },
        { "doctype", opt(c.doctype) },
        { "emit_base_tag", c.emit_base_tag },
        { "headers",
            {
                { "content_type", opt(c.headers.content_type) },
                { "x_content_type_options", opt(c.headers.x_content_type_options) },
                { "x_frame_options", opt(c.headers.x_frame_options) },
                { "x_ua_compatible", opt(c.headers.x_ua_compatible) },
                { "content_security_policy", opt(c.headers.content_security_policy) },
            } },
        { "stylesheet_refs", c.stylesheet_refs },
        { "error_page_echoes_url", c.error_page_echoes_url },
        { "seed_query", opt(c.seed_query) },
        { "seed_cookies", c.seed_cookies },
    };
}

namespace detail {

template <typename Enum, std::size_t N>
Enum enum_from(const nlohmann::json& v, const std::array<Enum, N>& values, std::string_view (*to_name)(Enum), std::string_view what)
{
    if (!v.is_string())
        throw ConfigError(std::string(what) + " must be a string");
    for (auto e : values) {
        if (to_name(e) == v.get<std::string>())
            return e;
    }
    throw ConfigError("unknown " + std::string(what) + " '" + v.get<std::string>() + "'");
}

inline std::optional<std::string> opt_string(const nlohmann::json& obj, const char* key)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
        return std::nullopt;
    if (!it->is_string())
        throw ConfigError(std::string(key) + " must be a string or null");
    return it->get<std::string>();
}

} // namespace detail

inline TargetConfig config_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ConfigError("target config must be an object");
    static const std::set<std::string> known { "name", "routing", "page_path", "sinks", "escaping", "doctype", "emit_base_tag",
        "headers", "stylesheet_refs", "error_page_echoes_url", "seed_query", "seed_cookies" };
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key))
            throw ConfigError("unknown target config field '" + key + "'");
    }
    TargetConfig c;
    try {
        c.name = j.at("name").get<std::string>();
        c.routing = detail::enum_from(j.at("routing"), all_routings, routing_name, "routing");
        c.page_path = j.value("page_path", c.page_path);
        if (j.contains("sinks")) {
            for (const auto& s : j.at("sinks"))
                c.sinks.insert(detail::enum_from(s, all_sinks, sink_name, "sink"));
        }
        if (j.contains("escaping"))
            c.escaping = detail::enum_from(j.at("escaping"), all_escapings, escaping_name, "escaping");
        c.doctype = detail::opt_string(j, "doctype");
        c.emit_base_tag = j.value("emit_base_tag", false);
        if (j.contains("headers")) {
            const auto& h = j.at("headers");
            if (!h.is_object())
                throw ConfigError("headers must be an object");
            if (h.contains("content_type"))
                c.headers.content_type = detail::opt_string(h, "content_type");
            c.headers.x_content_type_options = detail::opt_string(h, "x_content_type_options");
            c.headers.nosniff = c.headers.x_content_type_options && is_nosniff(*c.headers.x_content_type_options);
            c.headers.x_frame_options = detail::opt_string(h, "x_frame_options");
            c.headers.x_ua_compatible = detail::opt_string(h, "x_ua_compatible");
            c.headers.content_security_policy = detail::opt_string(h, "content_security_policy");
        }
        if (j.contains("stylesheet_refs"))
            c.stylesheet_refs = j.at("stylesheet_refs").get<std::vector<std::string>>();
        c.error_page_echoes_url = j.value("error_page_echoes_url", false);
        c.seed_query = detail::opt_string(j, "seed_query");
        if (j.contains("seed_cookies"))
            c.seed_cookies = j.at("seed_cookies").get<CookieJar>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("target config: ") + e.what());
    }
    if (c.page_path.empty() || c.page_path.front() != '/')
        throw ConfigError("page_path must start with '/'");
    return c;
}

inline std::vector<TargetConfig> load_targets(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open target config " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    std::vector<TargetConfig> out;
    if (doc.is_object() && doc.contains("targets")) {
        for (const auto& item : doc.at("targets"))
            out.push_back(config_from_json(item));
    } else {
        out.push_back(config_from_json(doc));
    }
    return out;
}

} // namespace rpo::mock
