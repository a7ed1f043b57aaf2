#pragma once

#include "gcoach/session.hpp"

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace gcoach {

// Blocking HTTP + WebSocket front end, one thread per connection.
//
//   GET   /healthz
//   POST  /sessions                                 text/plain or {"document": ...}
//   GET   /sessions/{id}
//   PATCH /sessions/{id}/regions/{region_id}        {"action": ...}
//   POST  /sessions/{id}/retry
//   GET   /sessions/{id}/chunks/{chunk_id}/schedule
//   GET   /clips/{clip_uri}                         supports single byte ranges
//   WS    /sessions/{id}/chunks/{chunk_id}/rehearse
class HttpServer {
public:
    // Port 0 picks an ephemeral port. Binds immediately; throws on failure.
    HttpServer(RehearsalService& service, const std::string& host, std::uint16_t port);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    std::uint16_t port() const noexcept { return port_; }

    // Accepts connections until stop(); returns afterwards.
    void run();
    // Unblocks run() and all connections, then waits for them to finish.
    void stop();

private:
    struct Impl;

    void serve_connection(int handle_id);

    RehearsalService& service_;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
};

} // namespace gcoach
