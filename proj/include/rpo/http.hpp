#pragma once

// Client contract the scanner talks to, plus wrappers that record every
// exchange and space out requests per host.

#include "rpo/error.hpp"
#include "rpo/headers.hpp"
#include "rpo/mutation.hpp"
#include "rpo/url.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace rpo {

using Clock = std::chrono::steady_clock;

struct HttpRequest {
    std::string method = "GET";
    WebUrl url;
    HeaderList headers;
    CookieJar cookies;
};

struct HttpResponse {
    int status = 0;
    HeaderList headers;
    std::string body;
    // URL the body was served from, after any redirects.
    WebUrl final_url;
};

struct HttpExchange {
    HttpRequest request;
    std::optional<HttpResponse> response;
    std::string error;
    Clock::time_point started;
    Clock::time_point finished;
};

class HttpClient {
public:
    virtual ~HttpClient() = default;
    // One request, no redirect following. Throws NetworkError.
    virtual HttpResponse get(const HttpRequest& request) = 0;
};

inline void require_get(const HttpRequest& request)
{
    if (request.method != "GET")
        throw InvalidArgument("refusing to send a " + request.method + " request");
}

// Keeps a timestamped log of everything passed through.
class RecordingClient : public HttpClient {
public:
    explicit RecordingClient(HttpClient& inner)
        : m_inner(inner)
    {
    }

    HttpResponse get(const HttpRequest& request) override
    {
        HttpExchange exchange { request, std::nullopt, {}, Clock::now(), {} };
        try {
            exchange.response = m_inner.get(request);
        } catch (const Error& e) {
            exchange.error = e.what();
            exchange.finished = Clock::now();
            push(std::move(exchange));
            throw;
        }
        exchange.finished = Clock::now();
        auto response = *exchange.response;
        push(std::move(exchange));
        return response;
    }

    std::vector<HttpExchange> exchanges() const
    {
        std::lock_guard lock(m_mutex);
        return m_log;
    }

    void clear()
    {
        std::lock_guard lock(m_mutex);
        m_log.clear();
    }

private:
    void push(HttpExchange exchange)
    {
        std::lock_guard lock(m_mutex);
        m_log.push_back(std::move(exchange));
    }

    HttpClient& m_inner;
    mutable std::mutex m_mutex;
    std::vector<HttpExchange> m_log;
};

// Serializes requests per host (authority) and keeps request starts at least
// `delay` apart.
class PoliteClient : public HttpClient {
public:
    PoliteClient(HttpClient& inner, Clock::duration delay)
        : m_inner(inner)
        , m_delay(delay)
    {
    }

    HttpResponse get(const HttpRequest& request) override
    {
        require_get(request);
        auto& slot = slot_for(request.url.authority());
        std::lock_guard lock(slot.mutex);
        if (slot.last) {
            auto ready = *slot.last + m_delay;
            std::this_thread::sleep_until(ready);
        }
        slot.last = Clock::now();
        return m_inner.get(request);
    }

private:
    struct Slot {
        std::mutex mutex;
        std::optional<Clock::time_point> last;
    };

    Slot& slot_for(const std::string& host)
    {
        std::lock_guard lock(m_slots_mutex);
        auto& slot = m_slots[host];
        if (!slot)
            slot = std::make_unique<Slot>();
        return *slot;
    }

    HttpClient& m_inner;
    Clock::duration m_delay;
    std::mutex m_slots_mutex;
    std::map<std::string, std::unique_ptr<Slot>> m_slots;
};

} // namespace rpo
