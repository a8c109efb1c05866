#pragma once

// Per-page pipeline: mutate, fetch, look for a self-referenced stylesheet
// that reflects the nonce, then re-run with the exploit payload and ask the
// rendering model whether each browser would apply it.

#include "rpo/http.hpp"
#include "rpo/mutation.hpp"
#include "rpo/page_analysis.hpp"
#include "rpo/payload.hpp"
#include "rpo/rendering.hpp"
#include "rpo/url.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rpo {

struct ScanConfig {
    int slash_padding = default_slash_padding;
    std::vector<NewlineVariant> newline_variants { all_newline_variants.begin(), all_newline_variants.end() };
    std::chrono::milliseconds per_host_delay { 1000 };
    int max_concurrent_hosts = 4;
    std::chrono::milliseconds request_timeout { 10000 };
    std::vector<std::string> blocked_suffixes { ".gov", ".mil", ".army", ".navy", ".airforce" };
    // Lab override: a blocked suffix listed here is allowed, but only for
    // loopback hosts.
    std::vector<std::string> allow_suffixes;
    // Names that resolve to loopback in this run (besides literal ones).
    std::set<std::string> loopback_hosts;
    std::vector<BrowserProfile> profiles = default_profiles();
    std::uint64_t seed = 0;
    std::string user_agent = "rpo-scan/1.0";
    std::string attacker_origin = "http://attacker.invalid";
    std::string nonce_origin = "http://nonce.invalid";
    int closer_count = default_closer_count;
    int max_redirects = 5;
};

inline void validate(const ScanConfig& config)
{
    if (config.slash_padding < 1)
        throw InvalidArgument("slash_padding must be at least 1");
    if (config.newline_variants.empty())
        throw InvalidArgument("at least one newline variant is required");
    if (config.max_concurrent_hosts < 1)
        throw InvalidArgument("max_concurrent_hosts must be at least 1");
    if (config.profiles.empty())
        throw InvalidArgument("no browser profiles configured");
    if (config.closer_count < 1)
        throw InvalidArgument("closer_count must be at least 1");
}

// Last two labels, or three under a two-letter country code with a generic
// second level (example.co.uk). No public suffix list.
inline std::string registrable_domain(std::string_view host)
{
    auto labels = detail::split(host, '.');
    if (labels.size() <= 2)
        return std::string(host);
    bool ipv4 = labels.size() == 4;
    for (const auto& label : labels)
        ipv4 = ipv4 && !label.empty() && std::all_of(label.begin(), label.end(), detail::is_digit);
    if (ipv4)
        return std::string(host);
    auto n = labels.size();
    auto keep = 2U;
    if (labels[n - 1].size() == 2) {
        for (std::string_view generic : { "co", "com", "org", "net", "ac", "gov", "edu" }) {
            if (labels[n - 2] == generic)
                keep = 3;
        }
    }
    std::vector<std::string> tail(labels.end() - keep, labels.end());
    return detail::join(tail, ".");
}

inline bool is_loopback(std::string_view host, const ScanConfig& config)
{
    if (host == "localhost" || host == "[::1]" || detail::istarts_with(host, "127."))
        return true;
    return config.loopback_hosts.count(std::string(host)) > 0;
}

// False when the site is under a blocked suffix.
inline bool ethics_gate(const WebUrl& url, const ScanConfig& config)
{
    auto site = "." + registrable_domain(url.host);
    for (const auto& suffix : config.blocked_suffixes) {
        auto dotted = suffix.front() == '.' ? suffix : "." + suffix;
        if (!detail::iends_with(site, dotted))
            continue;
        bool lifted = false;
        for (const auto& allowed : config.allow_suffixes) {
            if (detail::iequals(allowed, suffix) || detail::iequals(allowed, dotted))
                lifted = is_loopback(url.host, config);
        }
        if (!lifted)
            return false;
    }
    return true;
}

enum class VerdictStatus {
    NotVulnerable,
    Vulnerable,
    Exploitable,
};

enum class NotVulnerableReason {
    BaseTag,
    NoRelativeStylesheets,
    NoReflection,
    NetworkError,
};

enum class Blocker {
    BaseTag,
    Nosniff,
    XFrameOptions,
    FrameAncestors,
    StandardsMode,
    XUACompatible,
    // Stylesheet parsed, but error recovery swallowed the injected rule.
    StyleNotApplied,
    NetworkError,
};

inline std::string_view status_name(VerdictStatus s)
{
    switch (s) {
    case VerdictStatus::NotVulnerable:
        return "NotVulnerable";
    case VerdictStatus::Vulnerable:
        return "Vulnerable";
    case VerdictStatus::Exploitable:
        return "Exploitable";
    }
    return "?";
}

inline std::string_view reason_name(NotVulnerableReason r)
{
    switch (r) {
    case NotVulnerableReason::BaseTag:
        return "BaseTag";
    case NotVulnerableReason::NoRelativeStylesheets:
        return "NoRelativeStylesheets";
    case NotVulnerableReason::NoReflection:
        return "NoReflection";
    case NotVulnerableReason::NetworkError:
        return "NetworkError";
    }
    return "?";
}

inline constexpr std::array<Blocker, 8> all_blockers {
    Blocker::BaseTag, Blocker::Nosniff, Blocker::XFrameOptions, Blocker::FrameAncestors,
    Blocker::StandardsMode, Blocker::XUACompatible, Blocker::StyleNotApplied, Blocker::NetworkError,
};

inline std::string_view blocker_name(Blocker b)
{
    switch (b) {
    case Blocker::BaseTag:
        return "BaseTag";
    case Blocker::Nosniff:
        return "Nosniff";
    case Blocker::XFrameOptions:
        return "XFrameOptions";
    case Blocker::FrameAncestors:
        return "FrameAncestors";
    case Blocker::StandardsMode:
        return "StandardsMode";
    case Blocker::XUACompatible:
        return "XUACompatible";
    case Blocker::StyleNotApplied:
        return "StyleNotApplied";
    case Blocker::NetworkError:
        return "NetworkError";
    }
    return "?";
}

template <typename Enum, std::size_t N>
Enum parse_enum_name(std::string_view name, const std::array<Enum, N>& values, std::string_view (*to_name)(Enum))
{
    for (auto v : values) {
        if (to_name(v) == name)
            return v;
    }
    throw InvalidArgument("unknown value: " + std::string(name));
}

struct ProfileResult {
    bool exploitable = false;
    bool framed = false;
    std::vector<Blocker> blockers;
    std::string error;

    friend bool operator==(const ProfileResult&, const ProfileResult&) = default;
};

// Results are keyed by engine name; framed evaluations get a "+framed" suffix.
inline std::string result_key(Engine engine, bool framed)
{
    return std::string(engine_name(engine)) + (framed ? "+framed" : "");
}

struct ScanVerdict {
    WebUrl url;
    CookieJar cookies;
    VerdictStatus status = VerdictStatus::NotVulnerable;
    std::optional<NotVulnerableReason> reason;
    std::optional<MutationTechnique> technique;
    std::optional<NewlineVariant> newline;
    std::optional<std::string> mutated_url;
    std::optional<std::string> reflected_stylesheet_url;
    // The relative href that led to the reflecting stylesheet.
    std::optional<std::string> reflected_href;
    std::optional<std::string> nonce;
    std::map<std::string, ProfileResult> profile_results;
    std::vector<std::string> notes;
};

namespace detail {

inline bool is_redirect(int status)
{
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

} // namespace detail

// GET with redirect following; every hop passes the ethics gate first.
inline HttpResponse fetch(HttpClient& client, HttpRequest request, const ScanConfig& config)
{
    for (int hop = 0;; ++hop) {
        if (!ethics_gate(request.url, config))
            throw NetworkError("refusing to contact blocked host " + request.url.host);
        auto response = client.get(request);
        auto location = response.headers.get("Location");
        if (!detail::is_redirect(response.status) || !location) {
            response.final_url = request.url;
            return response;
        }
        if (hop >= config.max_redirects)
            throw NetworkError("too many redirects from " + request.url.serialize());
        try {
            request.url = resolve_relative(request.url, *location);
        } catch (const MalformedUrl& e) {
            throw NetworkError(std::string("bad redirect target: ") + e.what());
        }
        request.url.fragment.reset();
    }
}

inline HttpRequest page_request(const MutatedRequest& mutated, const ScanConfig& config)
{
    HttpRequest request;
    request.url = mutated.url;
    request.cookies = mutated.cookies;
    request.headers.set("User-Agent", config.user_agent);
    return request;
}

// Stylesheet fetch as the browser would issue it from the mutated page.
inline HttpRequest stylesheet_request(const WebUrl& target, const MutatedRequest& mutated, const ScanConfig& config)
{
    HttpRequest request;
    request.url = target;
    request.cookies = mutated.cookies;
    request.headers.set("User-Agent", config.user_agent);
    request.headers.set("Referer", mutated.url.serialize());
    return request;
}

inline Nonce nonce_for(const WebUrl& url, const ScanConfig& config, std::uint64_t attempt)
{
    auto h = detail::fnv1a(url.serialize());
    return generate_nonce(h ^ (config.seed * 0x9E3779B97F4A7C15ULL) ^ (attempt + 1) * 0xBF58476D1CE4E5B9ULL);
}

inline ScanVerdict scan_page(const WebUrl& url, const CookieJar& cookies, HttpClient& client, const ScanConfig& config)
{
    ScanVerdict verdict;
    verdict.url = url;
    verdict.cookies = cookies;
    std::set<NotVulnerableReason> seen;
    std::uint64_t attempt = 0;

    for (auto technique : applicable_techniques(url, cookies)) {
        for (auto newline : config.newline_variants) {
            auto nonce = nonce_for(url, config, attempt++);
            auto payload = build_reflection_payload(nonce, newline);
            auto mutated = mutate(url, technique, payload, config.slash_padding, cookies);
            auto label = std::string(technique_name(technique)) + "/" + std::string(newline_code(newline));

            HttpResponse page;
            try {
                page = fetch(client, page_request(mutated, config), config);
            } catch (const NetworkError& e) {
                verdict.notes.push_back(label + ": " + e.what());
                seen.insert(NotVulnerableReason::NetworkError);
                continue;
            }
            auto doc = analyze_html(page.body);
            if (has_blocking_base(doc)) {
                verdict.notes.push_back(label + ": base tag before relative stylesheets");
                seen.insert(NotVulnerableReason::BaseTag);
                break;
            }
            auto refs = doc.relative_hrefs();
            if (refs.empty()) {
                seen.insert(NotVulnerableReason::NoRelativeStylesheets);
                break;
            }
            auto base = mutated;
            base.url = page.final_url;
            bool reflected = false;
            for (std::size_t i = 0; i < refs.size() && !reflected; ++i) {
                auto targets = expand_stylesheet_targets(base, { refs[i] });
                if (targets.empty())
                    continue;
                try {
                    auto sheet = fetch(client, stylesheet_request(targets.front(), mutated, config), config);
                    if (!find_reflection(sheet.body, nonce).empty()) {
                        verdict.status = VerdictStatus::Vulnerable;
                        verdict.technique = technique;
                        verdict.newline = newline;
                        verdict.mutated_url = mutated.url.serialize();
                        verdict.reflected_stylesheet_url = targets.front().serialize();
                        verdict.reflected_href = refs[i];
                        verdict.nonce = nonce.value();
                        verdict.reason.reset();
                        reflected = true;
                    }
                } catch (const NetworkError& e) {
                    verdict.notes.push_back(label + ": " + e.what());
                    seen.insert(NotVulnerableReason::NetworkError);
                }
            }
            if (reflected)
                return verdict;
            seen.insert(NotVulnerableReason::NoReflection);
        }
    }
    for (auto reason : { NotVulnerableReason::BaseTag, NotVulnerableReason::NoRelativeStylesheets,
             NotVulnerableReason::NoReflection, NotVulnerableReason::NetworkError }) {
        if (seen.count(reason)) {
            verdict.reason = reason;
            break;
        }
    }
    if (!verdict.reason)
        verdict.reason = NotVulnerableReason::NoReflection;
    return verdict;
}

// What a verifier sees for one browser: the victim page fetched with the
// exploit payload and the stylesheet it self-references.
struct ExploitObservation {
    const BrowserProfile& profile;
    bool framed;
    const HttpResponse& page;
    const PageDocument& document;
    const HttpResponse& stylesheet;
    const std::string& nonce_url;
    const std::string& attacker_origin;
};

// Decides one profile. The default emulates the browser; a driver for a real
// browser can be substituted.
class ExploitEvaluator {
public:
    virtual ~ExploitEvaluator() = default;
    virtual ProfileResult evaluate(const ExploitObservation& observation) const = 0;
};

class EmulatedEvaluator : public ExploitEvaluator {
public:
    ProfileResult evaluate(const ExploitObservation& o) const override
    {
        ProfileResult result;
        result.framed = o.framed;
        auto victim = security_from_headers(o.page.headers);
        if (!victim.x_ua_compatible && o.document.meta_x_ua_compatible)
            victim.x_ua_compatible = o.document.meta_x_ua_compatible;
        auto victim_origin = o.page.final_url.origin();

        if (o.framed) {
            if (!framing_allowed(victim.x_frame_options, o.attacker_origin, victim_origin, o.profile))
                result.blockers.push_back(Blocker::XFrameOptions);
            if (o.profile.honors_frame_ancestors
                && !frame_ancestors_allowed(victim.content_security_policy, o.attacker_origin, victim_origin))
                result.blockers.push_back(Blocker::FrameAncestors);
        }
        if (o.profile.base_tag_effective && has_blocking_base(o.document))
            result.blockers.push_back(Blocker::BaseTag);

        auto mode = effective_mode(o.document.doctype, o.profile, o.framed, victim);
        auto sheet_security = security_from_headers(o.stylesheet.headers);
        bool accepted = stylesheet_accepted(o.profile, mode, sheet_security);
        if (!accepted) {
            if (mode == RenderingMode::Standards) {
                bool override_refused = o.framed && o.profile.supports_frame_override && victim.x_ua_compatible;
                result.blockers.push_back(override_refused ? Blocker::XUACompatible : Blocker::StandardsMode);
            } else {
                result.blockers.push_back(Blocker::Nosniff);
            }
        }
        bool fires = css_would_fire(o.stylesheet.body, o.nonce_url);
        if (accepted && !fires)
            result.blockers.push_back(Blocker::StyleNotApplied);
        result.exploitable = result.blockers.empty() && accepted && fires;
        return result;
    }
};

inline std::string nonce_url_for(const std::string& nonce, const ScanConfig& config)
{
    return config.nonce_origin + "/i/" + nonce;
}

inline ScanVerdict verify_exploitable(ScanVerdict verdict, HttpClient& client, const ScanConfig& config,
    const ExploitEvaluator& evaluator = EmulatedEvaluator {})
{
    if (verdict.status != VerdictStatus::Vulnerable || !verdict.technique || !verdict.newline || !verdict.nonce)
        throw InvalidArgument("verify_exploitable needs a vulnerable verdict");

    auto nonce_url = nonce_url_for(*verdict.nonce, config);
    auto exploit = build_exploit_payload(nonce_url, config.closer_count);
    auto mutated = mutate(verdict.url, *verdict.technique, exploit.url_encoded(*verdict.newline), config.slash_padding, verdict.cookies);

    auto fail_all = [&](const std::string& error) {
        for (const auto& profile : config.profiles) {
            for (bool framed : { false, true }) {
                if (framed && !profile.supports_frame_override)
                    continue;
                ProfileResult r;
                r.framed = framed;
                r.blockers.push_back(Blocker::NetworkError);
                r.error = error;
                verdict.profile_results[result_key(profile.engine, framed)] = r;
            }
        }
        verdict.notes.push_back("exploit: " + error);
        return verdict;
    };

    HttpResponse page;
    try {
        page = fetch(client, page_request(mutated, config), config);
    } catch (const NetworkError& e) {
        return fail_all(e.what());
    }
    auto doc = analyze_html(page.body);
    auto base = mutated;
    base.url = page.final_url;

    std::vector<std::string> hrefs;
    auto relative = doc.relative_hrefs();
    if (verdict.reflected_href && std::find(relative.begin(), relative.end(), *verdict.reflected_href) != relative.end())
        hrefs.push_back(*verdict.reflected_href);
    else
        hrefs = relative;

    std::vector<HttpResponse> sheets;
    std::string last_error;
    for (const auto& target : expand_stylesheet_targets(base, hrefs)) {
        try {
            sheets.push_back(fetch(client, stylesheet_request(target, mutated, config), config));
        } catch (const NetworkError& e) {
            last_error = e.what();
        }
    }
    if (sheets.empty())
        return fail_all(last_error.empty() ? "no stylesheet to evaluate" : last_error);

    bool any = false;
    for (const auto& profile : config.profiles) {
        for (bool framed : { false, true }) {
            if (framed && !profile.supports_frame_override)
                continue;
            ProfileResult best;
            for (std::size_t i = 0; i < sheets.size(); ++i) {
                auto r = evaluator.evaluate({ profile, framed, page, doc, sheets[i], nonce_url, config.attacker_origin });
                if (i == 0 || (r.exploitable && !best.exploitable))
                    best = r;
            }
            any = any || best.exploitable;
            verdict.profile_results[result_key(profile.engine, framed)] = best;
        }
    }
    if (any)
        verdict.status = VerdictStatus::Exploitable;
    return verdict;
}

} // namespace rpo
