#include "rpo/mutation.hpp"
#include "support/testing.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace rpo;
using rpo::testing::Gen;
namespace oracle = rpo::testing::oracle;

namespace {

bool has(const std::vector<MutationTechnique>& list, MutationTechnique t)
{
    return std::find(list.begin(), list.end(), t) != list.end();
}

std::string path_and_query(const WebUrl& u)
{
    return u.request_target();
}

} // namespace

TEST(ApplicableTechniques, Examples)
{
    auto simple = applicable_techniques(parse_url("http://h.com/page.asp"), {});
    EXPECT_TRUE(has(simple, MutationTechnique::PathParamSimple));
    EXPECT_TRUE(has(simple, MutationTechnique::EncodedPath));
    EXPECT_FALSE(has(simple, MutationTechnique::EncodedQuery));
    EXPECT_FALSE(has(simple, MutationTechnique::Cookie));

    EXPECT_TRUE(has(applicable_techniques(parse_url("http://h.com/page.jsp;p1;p2"), {}), MutationTechnique::PathParamSemicolon));
    EXPECT_TRUE(has(applicable_techniques(parse_url("http://h.com/page.html?k1=v1&k2=v2"), {}), MutationTechnique::EncodedQuery));
    EXPECT_TRUE(has(applicable_techniques(parse_url("http://h.com/page.php"), { { "k", "v" } }), MutationTechnique::Cookie));

    auto slash = applicable_techniques(parse_url("http://h.com/index.PHP/param/value"), {});
    EXPECT_TRUE(has(slash, MutationTechnique::PathParamSlash));
    EXPECT_FALSE(has(applicable_techniques(parse_url("http://h.com/index.php/"), {}), MutationTechnique::PathParamSlash));
}

TEST(ApplicableTechniques, InFixedOrder)
{
    auto all = applicable_techniques(parse_url("http://h.com/a.jsp;x/p?q=1"), { { "c", "1" } });
    EXPECT_EQ(all, std::vector<MutationTechnique>(all_techniques.begin(), all_techniques.end()));
}

TEST(Mutate, Examples)
{
    EXPECT_EQ(path_and_query(mutate(parse_url("http://h.com/page.asp"), MutationTechnique::PathParamSimple, "P", 2).url), "/page.asp/P//");
    EXPECT_EQ(path_and_query(mutate(parse_url("http://h.com/page.html?k1=v1&k2=v2"), MutationTechnique::EncodedQuery, "P", 2).url),
        "/page.html%3Fk1=Pv1&k2=Pv2//");

    auto encoded = mutate(parse_url("http://h.com/dir/page.aspx"), MutationTechnique::EncodedPath, "P", 0);
    EXPECT_EQ(path_and_query(encoded.url), "/dir/P%2F..%2Fpage.aspx");
    EXPECT_EQ(server_view(encoded.url).canonical_path, "/dir/page.aspx");

    auto cookie = mutate(parse_url("http://h.com/page.php"), MutationTechnique::Cookie, "P", 2, { { "k1", "v1" }, { "k2", "v2" } });
    EXPECT_EQ(cookie.cookies, (CookieJar { { "k1", "Pv1" }, { "k2", "Pv2" } }));
    EXPECT_EQ(path_and_query(cookie.url), "/page.php//");
}

TEST(Mutate, SlashAndSemicolonParameters)
{
    EXPECT_EQ(path_and_query(mutate(parse_url("http://h.com/index.php/param/value"), MutationTechnique::PathParamSlash, "P", 2).url),
        "/index.php/Pparam/Pvalue//");
    EXPECT_EQ(path_and_query(mutate(parse_url("http://h.com/page.jsp;p1;p2"), MutationTechnique::PathParamSemicolon, "P", 2).url),
        "/page.jsp;Pp1;Pp2//");
}

TEST(Mutate, RealPayloadEncodedPath)
{
    auto payload = build_reflection_payload(generate_nonce(1), NewlineVariant::LineFeed);
    auto m = mutate(parse_url("http://h.com/dir/page.aspx"), MutationTechnique::EncodedPath, payload, 0);
    EXPECT_EQ(path_and_query(m.url), "/dir/" + payload.encoded_text + "%2F..%2Fpage.aspx");

    // the exploit payload carries slashes inside its nonce URL
    auto exploit = build_exploit_payload("http://nonce.invalid/i/abc").url_encoded(NewlineVariant::LineFeed);
    auto e = mutate(parse_url("http://h.com/dir/page.aspx"), MutationTechnique::EncodedPath, exploit);
    EXPECT_EQ(server_view(e.url).canonical_path, "/dir/page.aspx");
}

TEST(Mutate, RejectsInapplicable)
{
    auto u = parse_url("http://h.com/page.asp");
    EXPECT_THROW(mutate(u, MutationTechnique::EncodedQuery, "P"), TechniqueNotApplicable);
    EXPECT_THROW(mutate(u, MutationTechnique::PathParamSemicolon, "P"), TechniqueNotApplicable);
    EXPECT_THROW(mutate(u, MutationTechnique::Cookie, "P"), TechniqueNotApplicable);
    EXPECT_THROW(mutate(u, MutationTechnique::PathParamSimple, "P", -1), InvalidArgument);
}

TEST(ExpandStylesheetTargets, Examples)
{
    auto m = mutate(parse_url("http://h.com/page.asp"), MutationTechnique::PathParamSimple, "P", 2);
    auto one = expand_stylesheet_targets(m, { "../style.css" });
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].path(), "/page.asp/P/style.css");
    EXPECT_EQ(expand_stylesheet_targets(m, { "a.css", "a.css" }).size(), 1u);

    auto padded = mutate(parse_url("http://h.com/page.asp"), MutationTechnique::PathParamSimple, "P", 20);
    auto deep = expand_stylesheet_targets(padded, { "../../../../../style.css" });
    ASSERT_EQ(deep.size(), 1u);
    EXPECT_NE(deep[0].serialize().find("/P/"), std::string::npos);
}

// Twenty slashes absorb up to nineteen "../" and every technique that carries
// the payload in the URL keeps it in the resolved stylesheet URL.
TEST(MutationProperties, PaddingSufficiency)
{
    const std::vector<std::string> pages = {
        "http://h.com/page.asp",
        "http://h.com/a/b/index.php/x/y",
        "http://h.com/app/page.jsp;p1;p2",
        "http://h.com/dir/page.aspx",
        "http://h.com/page.html?k1=v1&k2=v2",
    };
    const std::string payload = "%0AP%7B";
    for (const auto& page : pages) {
        auto u = parse_url(page);
        for (auto technique : applicable_techniques(u, {})) {
            auto m = mutate(u, technique, payload, 20);
            for (int depth = 0; depth <= 19; ++depth) {
                std::string ref;
                for (int i = 0; i < depth; ++i)
                    ref += "../";
                ref += "style.css";
                auto targets = expand_stylesheet_targets(m, { ref });
                ASSERT_EQ(targets.size(), 1u);
                EXPECT_NE(resolve_relative(m.url, ref).serialize().find(payload), std::string::npos)
                    << page << " " << technique_name(technique) << " depth " << depth;
                EXPECT_EQ(targets[0], resolve_relative(m.url, ref));
            }
        }
    }
}

TEST(MutationProperties, PaddingIsTheLimit)
{
    auto m = mutate(parse_url("http://h.com/page.asp"), MutationTechnique::PathParamSimple, "PAY", 20);
    std::string ref;
    for (int i = 0; i < 20; ++i)
        ref += "../";
    EXPECT_EQ(resolve_relative(m.url, ref + "s.css").serialize().find("PAY"), std::string::npos);
}

TEST(MutationProperties, EncodedPathCanonicalEquivalence)
{
    Gen gen(1000);
    auto payload = build_reflection_payload(generate_nonce(5), NewlineVariant::CarriageReturn);
    int failures = 0;
    for (int i = 0; i < 1000; ++i) {
        auto u = parse_url(gen.url());
        auto m = mutate(u, MutationTechnique::EncodedPath, payload, gen.range(0, 25));
        if (server_view(m.url) != server_view(u))
            ++failures;
        if (oracle::server_view(m.url.path()) != oracle::server_view(u.path()))
            ++failures;
    }
    EXPECT_EQ(failures, 0);
}

TEST(MutationProperties, HostPreservedAndBrowserDiverges)
{
    Gen gen(77);
    auto payload = build_reflection_payload(generate_nonce(9), NewlineVariant::LineFeed);
    for (int i = 0; i < 500; ++i) {
        auto u = parse_url(gen.url());
        CookieJar cookies;
        if (gen.chance(0.5))
            cookies[gen.word()] = gen.word();
        for (auto technique : applicable_techniques(u, cookies)) {
            auto m = mutate(u, technique, payload, gen.range(1, 20), cookies);
            EXPECT_EQ(m.url.host, u.host);
            EXPECT_EQ(m.url.scheme, u.scheme);
            EXPECT_EQ(m.url.port, u.port);
            EXPECT_TRUE(browser_base_directory(m.url) != browser_base_directory(u) || m.cookies != cookies)
                << u.serialize() << " " << technique_name(technique);
        }
    }
}

TEST(Cookies, HeaderRoundTrip)
{
    CookieJar jar { { "a", "1" }, { "b", "x%0A" } };
    EXPECT_EQ(serialize_cookies(jar), "a=1; b=x%0A");
    EXPECT_EQ(parse_cookie_header(serialize_cookies(jar)), jar);
    EXPECT_EQ(parse_cookie_header(" a=1 ;; flag "), (CookieJar { { "a", "1" }, { "flag", "" } }));
}

TEST(TechniqueNames, RoundTrip)
{
    for (auto t : all_techniques)
        EXPECT_EQ(parse_technique(technique_name(t)), t);
    EXPECT_THROW(parse_technique("Nope"), InvalidArgument);
}
