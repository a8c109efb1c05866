#include "rpo/http_client.hpp"
#include "rpo/mock_server.hpp"

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <thread>

using namespace rpo;
using namespace std::chrono_literals;

namespace {

class StubClient : public HttpClient {
public:
    HttpResponse get(const HttpRequest& request) override
    {
        ++calls;
        if (request.url.host == "down.example")
            throw NetworkError("connection refused");
        HttpResponse r;
        r.status = 200;
        r.body = request.url.serialize();
        r.final_url = request.url;
        return r;
    }
    std::atomic<int> calls { 0 };
};

HttpRequest at(const std::string& url)
{
    HttpRequest r;
    r.url = parse_url(url);
    return r;
}

// Raw httplib server for the transport checks the mock target cannot express.
class Fixture {
public:
    Fixture()
    {
        // route matching sees the decoded path, so answer before routing
        m_server.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
            if (req.target == "/redirect") {
                res.status = 302;
                res.set_header("Location", "/elsewhere");
                return httplib::Server::HandlerResponse::Handled;
            }
            std::string out = "target=" + req.target + "\n";
            for (const char* h : { "User-Agent", "Cookie", "Referer", "Host" })
                out += std::string(h) + "=" + req.get_header_value(h) + "\n";
            res.set_content(out, "text/plain");
            return httplib::Server::HandlerResponse::Handled;
        });
        m_port = m_server.bind_to_any_port("127.0.0.1");
        m_thread = std::thread([this] { m_server.listen_after_bind(); });
        m_server.wait_until_ready();
    }
    ~Fixture()
    {
        m_server.stop();
        m_thread.join();
    }
    int port() const { return m_port; }
    std::string origin() const { return "http://127.0.0.1:" + std::to_string(m_port); }

private:
    httplib::Server m_server;
    int m_port = 0;
    std::thread m_thread;
};

// Accepts one connection and keeps the request bytes exactly as sent; httplib's
// own server decodes header values, so it cannot show them.
class RawCapture {
public:
    RawCapture()
    {
        m_fd = socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr {};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        socklen_t len = sizeof(addr);
        if (bind(m_fd, reinterpret_cast<sockaddr*>(&addr), len) != 0 || listen(m_fd, 1) != 0)
            throw std::runtime_error("cannot listen");
        getsockname(m_fd, reinterpret_cast<sockaddr*>(&addr), &len);
        m_port = ntohs(addr.sin_port);
        m_thread = std::thread([this] {
            int c = accept(m_fd, nullptr, nullptr);
            if (c < 0)
                return;
            char buf[4096];
            while (m_request.find("\r\n\r\n") == std::string::npos) {
                auto n = read(c, buf, sizeof(buf));
                if (n <= 0)
                    break;
                m_request.append(buf, static_cast<std::size_t>(n));
            }
            std::string reply = "HTTP/1.1 200 OK\r\nContent-Length: 2\r\nConnection: close\r\n\r\nok";
            (void)!write(c, reply.data(), reply.size());
            close(c);
        });
    }
    ~RawCapture()
    {
        shutdown(m_fd, SHUT_RDWR);
        close(m_fd);
        m_thread.join();
    }
    int port() const { return m_port; }
    // Valid once the client call returned.
    const std::string& request() const { return m_request; }

private:
    int m_fd = -1;
    int m_port = 0;
    std::string m_request;
    std::thread m_thread;
};

} // namespace

TEST(RequireGet, RejectsOtherMethods)
{
    auto r = at("http://a.com/");
    EXPECT_NO_THROW(require_get(r));
    for (const char* m : { "POST", "PUT", "HEAD", "get" }) {
        r.method = m;
        EXPECT_THROW(require_get(r), InvalidArgument) << m;
    }
}

TEST(RecordingClient, LogsResponsesAndErrors)
{
    StubClient stub;
    RecordingClient rec(stub);
    EXPECT_EQ(rec.get(at("http://a.com/x")).status, 200);
    EXPECT_THROW(rec.get(at("http://down.example/")), NetworkError);
    auto log = rec.exchanges();
    ASSERT_EQ(log.size(), 2u);
    EXPECT_TRUE(log[0].response);
    EXPECT_EQ(log[0].request.url.serialize(), "http://a.com/x");
    EXPECT_FALSE(log[1].response);
    EXPECT_EQ(log[1].error, "connection refused");
    for (const auto& e : log)
        EXPECT_LE(e.started, e.finished);
    rec.clear();
    EXPECT_TRUE(rec.exchanges().empty());
}

TEST(PoliteClient, RejectsPostBeforeSending)
{
    StubClient stub;
    PoliteClient polite(stub, 0ms);
    auto r = at("http://a.com/");
    r.method = "POST";
    EXPECT_THROW(polite.get(r), InvalidArgument);
    EXPECT_EQ(stub.calls, 0);
}

TEST(PoliteClient, SpacesRequestsPerAuthority)
{
    StubClient stub;
    RecordingClient rec(stub);
    PoliteClient polite(rec, 40ms);
    std::vector<std::thread> threads;
    for (int t = 0; t < 3; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 3; ++i)
                polite.get(at("http://a.com/" + std::to_string(i)));
        });
    }
    for (auto& t : threads)
        t.join();
    auto log = rec.exchanges();
    ASSERT_EQ(log.size(), 9u);
    for (std::size_t i = 1; i < log.size(); ++i)
        EXPECT_GE(log[i].started - log[i - 1].started, 40ms);
}

TEST(PoliteClient, HostsDoNotWaitOnEachOther)
{
    StubClient stub;
    RecordingClient rec(stub);
    PoliteClient polite(rec, 60ms);
    auto start = Clock::now();
    std::vector<std::thread> threads;
    for (const char* host : { "http://a.com/", "http://b.com/", "http://a.com:8080/", "http://down.example/" }) {
        threads.emplace_back([&, host] {
            for (int i = 0; i < 3; ++i) {
                try {
                    polite.get(at(host));
                } catch (const NetworkError&) {
                }
            }
        });
    }
    for (auto& t : threads)
        t.join();
    // three requests per host need two gaps; serialized hosts would need eleven
    EXPECT_LT(Clock::now() - start, 6 * 60ms);
    EXPECT_EQ(rec.exchanges().size(), 12u);
}

TEST(HttplibClient, SendsTargetAndHeadersVerbatim)
{
    RawCapture raw;
    HttplibClient client;
    auto r = at("http://127.0.0.1:" + std::to_string(raw.port()) + "/a/P%2F..%2Fb.aspx/%0A%7B%7D//?q=%3F%26");
    r.headers.set("Referer", "http://x/%0A");
    r.cookies["s"] = "v%7B";
    auto resp = client.get(r);
    EXPECT_EQ(resp.status, 200);
    EXPECT_EQ(resp.body, "ok");
    EXPECT_EQ(resp.final_url, r.url);
    const auto& sent = raw.request();
    EXPECT_EQ(sent.rfind("GET /a/P%2F..%2Fb.aspx/%0A%7B%7D//?q=%3F%26 HTTP/1.1\r\n", 0), 0u) << sent;
    for (const char* line : { "\r\nUser-Agent: rpo-scan/1.0\r\n", "\r\nCookie: s=v%7B\r\n", "\r\nReferer: http://x/%0A\r\n" })
        EXPECT_NE(sent.find(line), std::string::npos) << line << sent;
}

TEST(MockServer, HeaderValuesDecodedOnce)
{
    mock::TargetConfig c;
    c.page_path = "/p";
    c.sinks = { mock::Sink::EchoCookieValues, mock::Sink::EchoReferrer };
    mock::MockServer server(c);
    HttplibClient client;
    auto r = at(server.origin() + "/p");
    r.headers.set("Referer", "http://x/%2541");
    r.cookies["s"] = "v%257B";
    auto body = client.get(r).body;
    // same echoes as the in-process path
    auto direct = mock::handle_request(c, r).body;
    EXPECT_EQ(body, direct);
    EXPECT_NE(body.find(">http://x/%41<"), std::string::npos) << body;
    EXPECT_NE(body.find(">v%7B<"), std::string::npos) << body;
}

TEST(HttplibClient, DoesNotFollowRedirects)
{
    Fixture f;
    HttplibClient client;
    auto resp = client.get(at(f.origin() + "/redirect"));
    EXPECT_EQ(resp.status, 302);
    EXPECT_EQ(*resp.headers.get("Location"), "/elsewhere");
}

TEST(HttplibClient, ResolveMapKeepsHostHeader)
{
    Fixture f;
    TransportOptions options;
    options.resolve["victim.test"] = "127.0.0.1";
    HttplibClient client(options);
    auto resp = client.get(at("http://victim.test:" + std::to_string(f.port()) + "/x"));
    EXPECT_NE(resp.body.find("Host=victim.test:" + std::to_string(f.port())), std::string::npos) << resp.body;
}

TEST(HttplibClient, RefusedConnectionIsNetworkError)
{
    int port = 0;
    {
        mock::MockServer s(mock::TargetConfig {});
        port = s.port();
    }
    TransportOptions options;
    options.timeout = 2000ms;
    HttplibClient client(options);
    EXPECT_THROW(client.get(at("http://127.0.0.1:" + std::to_string(port) + "/")), NetworkError);
    auto post = at("http://127.0.0.1:" + std::to_string(port) + "/");
    post.method = "POST";
    EXPECT_THROW(client.get(post), InvalidArgument);
}
