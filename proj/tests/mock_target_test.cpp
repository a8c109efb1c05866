#include "rpo/http_client.hpp"
#include "rpo/mock_server.hpp"
#include "support/testing.hpp"

#include <gtest/gtest.h>

using namespace rpo;
using namespace rpo::mock;
using rpo::testing::fixture_path;

namespace {

TargetConfig php(std::set<Sink> sinks)
{
    TargetConfig c;
    c.name = "t";
    c.routing = Routing::PathInfoRewrite;
    c.page_path = "/page.php";
    c.sinks = std::move(sinks);
    return c;
}

HttpResponse get(const TargetConfig& c, std::string_view target, const HeaderList& headers = {})
{
    return handle_request(c, "GET", target, headers);
}

bool contains(const std::string& haystack, std::string_view needle)
{
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST(HandleRequest, PathInfoServesSuffix)
{
    auto c = php({ Sink::EchoUrl });
    auto plain = get(c, "/page.php");
    auto mutated = get(c, "/page.php/P//");
    EXPECT_EQ(plain.status, 200);
    EXPECT_EQ(mutated.status, 200);
    EXPECT_TRUE(contains(mutated.body, "<div class=\"echo\">/page.php/P//</div>"));

    // same page apart from the echo
    auto without_sinks = php({});
    EXPECT_EQ(get(without_sinks, "/page.php").body, get(without_sinks, "/page.php/P//").body);
    EXPECT_EQ(get(c, "/other.php").status, 404);
    EXPECT_EQ(get(c, "/page.phpx").status, 404);
}

TEST(HandleRequest, ExactFileErrorPage)
{
    auto c = php({ Sink::EchoUrl });
    c.routing = Routing::ExactFile;
    auto r = get(c, "/page.php/P//");
    EXPECT_EQ(r.status, 404);
    EXPECT_FALSE(contains(r.body, "/page.php/P//"));

    c.error_page_echoes_url = true;
    r = get(c, "/page.php/P//");
    EXPECT_EQ(r.status, 404);
    EXPECT_TRUE(contains(r.body, "Not found: /page.php/P//"));
    EXPECT_EQ(get(c, "/page.php").status, 200);
}

TEST(HandleRequest, EncodedSlashDecode)
{
    auto c = php({});
    c.routing = Routing::EncodedSlashDecode;
    c.page_path = "/page.aspx";
    auto r = get(c, "/P%2F..%2Fpage.aspx");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body, get(c, "/page.aspx").body);
    // the browser view of the same bytes asks for a different file
    EXPECT_EQ(server_view("/P%2F..%2Fpage.aspx").canonical_path, server_view("/page.aspx").canonical_path);
    EXPECT_EQ(get(c, "/P%2Fpage.aspx").status, 404);
}

TEST(HandleRequest, SemicolonParams)
{
    auto c = php({ Sink::EchoUrl });
    c.routing = Routing::SemicolonParams;
    c.page_path = "/page.jsp";
    EXPECT_EQ(get(c, "/page.jsp;P//").status, 200);
    EXPECT_EQ(get(c, "/page.jsp;jsessionid=1/P").status, 200);
    EXPECT_EQ(get(c, "/x;a/page.jsp").status, 404);
}

TEST(HandleRequest, Sinks)
{
    auto c = php({ Sink::EchoQueryValues, Sink::EchoCookieValues, Sink::EchoReferrer });
    HeaderList h;
    h.set("Cookie", "a=c%7Bv; b=w");
    h.set("Referer", "http://r/x%20y");
    auto r = get(c, "/page.php?k=v%41&flag&k2=", h);
    for (const char* echo : { ">vA<", ">c{v<", ">w<", ">http://r/x y<", "><" })
        EXPECT_TRUE(contains(r.body, echo)) << echo;
    EXPECT_FALSE(contains(r.body, "flag"));
}

TEST(HandleRequest, EscapingNeutralizesMarkup)
{
    auto c = php({ Sink::EchoUrl });
    c.escaping = Escaping::HtmlEntities;
    auto r = get(c, "/page.php/%7B%7Dbody%7B");
    EXPECT_TRUE(contains(r.body, "&#123;&#125;body&#123;"));
    EXPECT_FALSE(contains(r.body, "{}body{"));
}

TEST(HandleRequest, HeadersDoctypeBase)
{
    auto c = php({});
    c.doctype = "<!DOCTYPE html>";
    c.headers.x_frame_options = "DENY";
    c.headers.nosniff = true;
    c.headers.x_content_type_options = "nosniff";
    c.emit_base_tag = true;
    auto r = get(c, "/page.php");
    EXPECT_EQ(r.body.rfind("<!DOCTYPE html>\n", 0), 0u);
    EXPECT_EQ(*r.headers.get("X-Frame-Options"), "DENY");
    EXPECT_EQ(*r.headers.get("X-Content-Type-Options"), "nosniff");
    EXPECT_TRUE(has_blocking_base(analyze_html(r.body)));
    // on a 404 too
    EXPECT_EQ(*get(c, "/nope").headers.get("X-Frame-Options"), "DENY");
}

TEST(HandleRequest, OnlyGetAndHead)
{
    auto c = php({ Sink::EchoUrl });
    EXPECT_EQ(handle_request(c, "POST", "/page.php", {}).status, 405);
    EXPECT_EQ(handle_request(c, "PUT", "/page.php", {}).status, 405);
    EXPECT_EQ(handle_request(c, "HEAD", "/page.php", {}).status, 200);
}

TEST(HandleRequest, PureFunction)
{
    for (const auto& c : load_targets(fixture_path("mock/matrix.json"))) {
        for (const char* target : { "/", "/rpo/page.php", "/rpo/page.php/a//", "/rpo/x%2F..%2Fpage.php?q=1" }) {
            auto a = get(c, target);
            auto b = get(c, target);
            EXPECT_EQ(a.status, b.status);
            EXPECT_EQ(a.body, b.body);
            EXPECT_EQ(a.headers, b.headers);
        }
    }
}

TEST(DirectClient, RejectsPost)
{
    auto c = php({});
    DirectClient client(c);
    HttpRequest req;
    req.url = parse_url("http://h/page.php");
    EXPECT_EQ(client.get(req).status, 200);
    req.method = "POST";
    EXPECT_THROW(client.get(req), InvalidArgument);
}

TEST(TargetConfigJson, RoundTripAndStrict)
{
    for (const auto& c : load_targets(fixture_path("mock/matrix.json")))
        EXPECT_EQ(config_from_json(to_json(c)), c) << c.name;

    auto j = to_json(php({ Sink::EchoUrl }));
    j["surprise"] = 1;
    EXPECT_THROW(config_from_json(j), ConfigError);
    auto bad_routing = to_json(php({}));
    bad_routing["routing"] = "Teleport";
    EXPECT_THROW(config_from_json(bad_routing), ConfigError);
    auto relative_page = to_json(php({}));
    relative_page["page_path"] = "page.php";
    EXPECT_THROW(config_from_json(relative_page), ConfigError);
}

TEST(TargetConfigJson, ShippedFixtures)
{
    auto matrix = load_targets(fixture_path("mock/matrix.json"));
    EXPECT_GE(matrix.size(), 60u);
    std::set<std::string> names;
    for (const auto& c : matrix)
        EXPECT_TRUE(names.insert(c.name).second) << "duplicate " << c.name;
    auto single = load_targets(fixture_path("mock/pathinfo_url_quirks.json"));
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0].routing, Routing::PathInfoRewrite);
    EXPECT_EQ(single[0].sinks, std::set<Sink> { Sink::EchoUrl });
    EXPECT_THROW(load_targets(fixture_path("mock/missing.json")), Error);
}

TEST(GroundTruth, SignatureConfigs)
{
    auto profiles = default_profiles();
    auto truth = [&](const TargetConfig& c) { return compute_ground_truth(c, profiles, "http://attacker.invalid", "http://victim"); };
    auto c = php({ Sink::EchoUrl });
    c.doctype = "<!DOCTYPE HTML PUBLIC \"-//W3C//DTD HTML 4.01 Transitional//EN\">";
    auto quirks = truth(c);
    EXPECT_TRUE(quirks.vulnerable);
    for (const auto& [key, ok] : quirks.exploitable)
        EXPECT_TRUE(ok) << key;

    c.emit_base_tag = true;
    EXPECT_FALSE(truth(c).vulnerable);
    c.emit_base_tag = false;

    c.doctype = "<!DOCTYPE html>";
    for (const auto& [key, ok] : truth(c).exploitable)
        EXPECT_EQ(ok, key == result_key(Engine::InternetExplorer, true)) << key;

    c.routing = Routing::ExactFile;
    EXPECT_FALSE(truth(c).vulnerable);
}

// Loopback server

TEST(MockServer, LivenessAndShutdown)
{
    auto server = serve(php({ Sink::EchoUrl }));
    HttplibClient client;
    HttpRequest req;
    req.url = parse_url(server->origin() + "/");
    EXPECT_EQ(client.get(req).status, 404);
    req.url = parse_url(server->origin() + "/page.php/P%0A//");
    auto r = client.get(req);
    EXPECT_EQ(r.status, 200);
    EXPECT_TRUE(contains(r.body, "/page.php/P\n//"));

    server->stop();
    EXPECT_THROW(client.get(req), NetworkError);
}

TEST(MockServer, TwoPortsIndependent)
{
    auto a = serve(php({ Sink::EchoUrl }));
    auto exact = php({ Sink::EchoUrl });
    exact.routing = Routing::ExactFile;
    auto b = serve(exact);
    EXPECT_NE(a->port(), b->port());
    HttplibClient client;
    HttpRequest req;
    req.url = parse_url(a->origin() + "/page.php/x");
    EXPECT_EQ(client.get(req).status, 200);
    req.url = parse_url(b->origin() + "/page.php/x");
    EXPECT_EQ(client.get(req).status, 404);
}

TEST(MockServer, PortInUse)
{
    auto a = serve(php({}));
    EXPECT_THROW(MockServer(php({}), a->port()), PortInUse);
}

TEST(MockServer, RawTargetReachesHandler)
{
    // the transport must not re-encode or normalize the path
    auto c = php({ Sink::EchoUrl });
    c.routing = Routing::EncodedSlashDecode;
    auto server = serve(c);
    HttplibClient client;
    HttpRequest req;
    req.url = parse_url(server->origin() + "/P%2F..%2Fpage.php//");
    auto r = client.get(req);
    EXPECT_EQ(r.status, 200);
    EXPECT_TRUE(contains(r.body, ">/P/../page.php//<"));
}
