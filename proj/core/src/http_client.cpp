#include "http_client.hpp"

#include "gcoach/errors.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

namespace gcoach::detail {

namespace {

struct Target {
    std::string origin;
    std::string path;
};

Target split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("endpoint is not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout, int max_retries) {
    const auto target = split_url(url);
    const auto payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0) {
            spdlog::warn("retrying {} (attempt {}): {}", url, attempt + 1, last_error);
            std::this_thread::sleep_for(std::chrono::milliseconds(50) * attempt);
        }
        httplib::Client client(target.origin);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        auto res = client.Post(target.path, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw TransportError(url + ": malformed response: " + e.what());
        }
    }
    throw TransportError(url + ": " + last_error);
}

} // namespace gcoach::detail
