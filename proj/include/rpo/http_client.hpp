#pragma once

// HTTP/1.1 transport over cpp-httplib. Paths go out exactly as the WebUrl
// holds them; nothing is re-encoded.

#include "rpo/http.hpp"

#include <httplib.h>

#include <chrono>
#include <map>
#include <string>

namespace rpo {

struct TransportOptions {
    std::chrono::milliseconds timeout { 10000 };
    std::string user_agent = "rpo-scan/1.0";
    // host -> address to connect to instead of resolving the name.
    std::map<std::string, std::string> resolve;
};

class HttplibClient : public HttpClient {
public:
    explicit HttplibClient(TransportOptions options = {})
        : m_options(std::move(options))
    {
    }

    HttpResponse get(const HttpRequest& request) override
    {
        require_get(request);
        const auto& url = request.url;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (url.scheme == "https")
            throw NetworkError("built without TLS support: " + url.serialize());
#endif
        httplib::Client client(url.scheme + "://" + url.authority());
        client.set_url_encode(false);
        client.set_follow_location(false);
        client.set_keep_alive(false);
        auto seconds = std::chrono::duration_cast<std::chrono::seconds>(m_options.timeout);
        auto micros = std::chrono::duration_cast<std::chrono::microseconds>(m_options.timeout - seconds);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        if (!m_options.resolve.empty())
            client.set_hostname_addr_map(m_options.resolve);

        httplib::Headers headers;
        for (const auto& [name, value] : request.headers)
            headers.emplace(name, value);
        if (!request.headers.contains("User-Agent"))
            headers.emplace("User-Agent", m_options.user_agent);
        if (!request.cookies.empty())
            headers.emplace("Cookie", serialize_cookies(request.cookies));

        auto result = client.Get(url.request_target(), headers);
        if (!result)
            throw NetworkError(url.serialize() + ": " + httplib::to_string(result.error()));

        HttpResponse response;
        response.status = result->status;
        for (const auto& [name, value] : result->headers)
            response.headers.add(name, value);
        response.body = result->body;
        response.final_url = url;
        return response;
    }

private:
    TransportOptions m_options;
};

} // namespace rpo
