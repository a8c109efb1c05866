#pragma once

// Loopback HTTP/1.1 listener for a mock target.

#include "rpo/error.hpp"
#include "rpo/mock_target.hpp"

#include <httplib.h>

#include <memory>
#include <string>
#include <thread>

namespace rpo::mock {

class MockServer {
public:
    // port 0 picks a free port.
    MockServer(TargetConfig config, int port = 0, std::string address = "127.0.0.1")
        : m_config(std::move(config))
        , m_address(std::move(address))
    {
        m_server.new_task_queue = [] { return new httplib::ThreadPool(4); };
        m_server.set_keep_alive_max_count(1);
        // The library default adds SO_REUSEPORT, which would let a second
        // server share the port instead of failing.
        m_server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        m_server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            HeaderList headers;
            for (const auto& [name, value] : req.headers)
                headers.add(name, value);
            // httplib hands over header values already percent-decoded
            auto out = handle_request(m_config, req.method, req.target, headers, true);
            res.status = out.status;
            std::string content_type = "text/html";
            for (const auto& [name, value] : out.headers) {
                if (rpo::detail::iequals(name, "Content-Type"))
                    content_type = value;
                else
                    res.set_header(name, value);
            }
            res.set_content(out.body, content_type);
            return httplib::Server::HandlerResponse::Handled;
        });

        if (port == 0) {
            m_port = m_server.bind_to_any_port(m_address);
            if (m_port < 0)
                throw PortInUse("could not bind any port on " + m_address);
        } else {
            if (!m_server.bind_to_port(m_address, port))
                throw PortInUse("port " + std::to_string(port) + " on " + m_address + " is not available");
            m_port = port;
        }
        m_thread = std::thread([this] { m_server.listen_after_bind(); });
        m_server.wait_until_ready();
    }

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    ~MockServer() { stop(); }

    void stop()
    {
        m_server.stop();
        if (m_thread.joinable())
            m_thread.join();
    }

    int port() const { return m_port; }
    std::string origin() const { return "http://" + m_address + ":" + std::to_string(m_port); }
    const TargetConfig& config() const { return m_config; }

    // Blocks until stop() is called from another thread or a signal.
    void wait()
    {
        if (m_thread.joinable())
            m_thread.join();
    }

private:
    TargetConfig m_config;
    std::string m_address;
    httplib::Server m_server;
    int m_port = 0;
    std::thread m_thread;
};

inline std::unique_ptr<MockServer> serve(TargetConfig config, int port = 0)
{
    return std::make_unique<MockServer>(std::move(config), port);
}

} // namespace rpo::mock
