#include "gcoach/server.hpp"

#include "gcoach/errors.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <sys/socket.h>

#include <atomic>
#include <fstream>
#include <optional>
#include <regex>

namespace gcoach {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

struct HttpServer::Impl {
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::atomic<bool> stopping{false};

    std::mutex mutex;
    std::condition_variable idle;
    int next_id = 0;
    std::map<int, tcp::socket> connections; // socket owned here while its thread runs
};

namespace {

std::string_view sv(beast::string_view s) {
    return {s.data(), s.size()};
}

std::string percent_decode(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::vector<std::string> split_path(std::string_view target) {
    if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < target.size()) {
        while (i < target.size() && target[i] == '/') ++i;
        auto j = target.find('/', i);
        if (j == std::string_view::npos) j = target.size();
        if (j > i) parts.push_back(percent_decode(target.substr(i, j - i)));
        i = j;
    }
    return parts;
}

Response make_response(const Request& req, http::status status, std::string body,
                       std::string_view content_type = "application/json") {
    Response res{status, req.version()};
    res.set(http::field::server, "gcoach");
    res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

Response json_response(const Request& req, http::status status, const nlohmann::ordered_json& j) {
    return make_response(req, status, j.dump());
}

Response error_response(const Request& req, http::status status, std::string_view message,
                        std::optional<std::size_t> line = std::nullopt) {
    nlohmann::ordered_json j;
    j["error"] = std::string(message);
    if (line) j["line"] = *line;
    return json_response(req, status, j);
}

struct ByteRange {
    std::uintmax_t first = 0;
    std::uintmax_t last = 0;
};

// Single "bytes=a-b" range. nullopt means unsatisfiable; an absent header is
// handled by the caller.
std::optional<ByteRange> parse_range(std::string_view header, std::uintmax_t size) {
    static const std::regex re(R"(^\s*bytes=(\d*)-(\d*)\s*$)");
    std::cmatch m;
    const std::string h(header);
    if (!std::regex_match(h.c_str(), m, re)) return std::nullopt;
    const std::string a = m[1].str();
    const std::string b = m[2].str();
    if (size == 0 || (a.empty() && b.empty())) return std::nullopt;
    try {
        if (a.empty()) {
            const auto n = std::stoull(b);
            if (n == 0) return std::nullopt;
            return ByteRange{n >= size ? 0 : size - n, size - 1};
        }
        const auto first = std::stoull(a);
        if (first >= size) return std::nullopt;
        auto last = b.empty() ? size - 1 : std::stoull(b);
        if (last < first) return std::nullopt;
        if (last >= size) last = size - 1;
        return ByteRange{first, last};
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

Response serve_clip(const Request& req, const ClipFile& clip) {
    const auto size = std::filesystem::file_size(clip.path);
    ByteRange range{0, size ? size - 1 : 0};
    bool partial = false;
    if (auto it = req.find(http::field::range); it != req.end()) {
        auto parsed = parse_range(sv(it->value()), size);
        if (!parsed) {
            auto res = make_response(req, http::status::range_not_satisfiable, "", clip.content_type);
            res.set(http::field::content_range, "bytes */" + std::to_string(size));
            res.prepare_payload();
            return res;
        }
        range = *parsed;
        partial = true;
    }
    std::string body;
    if (size > 0) {
        std::ifstream in(clip.path, std::ios::binary);
        in.seekg(static_cast<std::streamoff>(range.first));
        body.resize(range.last - range.first + 1);
        in.read(body.data(), static_cast<std::streamsize>(body.size()));
        if (!in) throw Error("failed reading clip " + clip.path.string());
    }
    auto res = make_response(req, partial ? http::status::partial_content : http::status::ok, std::move(body),
                             clip.content_type);
    res.set(http::field::accept_ranges, "bytes");
    if (partial)
        res.set(http::field::content_range, "bytes " + std::to_string(range.first) + "-" + std::to_string(range.last) +
                                                "/" + std::to_string(size));
    if (req.method() == http::verb::head) {
        res.body().clear();
        res.content_length(partial ? range.last - range.first + 1 : size);
    }
    return res;
}

nlohmann::json parse_json_body(const Request& req) {
    auto j = nlohmann::json::parse(req.body(), nullptr, false);
    if (j.is_discarded()) throw InputError("request body is not valid JSON");
    return j;
}

bool is_json(const Request& req) {
    auto it = req.find(http::field::content_type);
    return it != req.end() && it->value().find("json") != beast::string_view::npos;
}

Response route(RehearsalService& service, const Request& req) {
    const auto parts = split_path(sv(req.target()));
    const auto method = req.method();
    const bool get = method == http::verb::get || method == http::verb::head;

    if (method == http::verb::options) {
        auto res = make_response(req, http::status::no_content, "");
        res.set(http::field::access_control_allow_methods, "GET, POST, PATCH, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type, Range");
        return res;
    }
    if (parts.size() == 1 && parts[0] == "healthz" && get) {
        nlohmann::ordered_json j;
        j["status"] = "ok";
        j["sessions"] = service.session_count();
        return json_response(req, http::status::ok, j);
    }
    if (!parts.empty() && parts[0] == "clips" && get) {
        if (parts.size() < 2) return error_response(req, http::status::not_found, "no clip given");
        std::string uri = parts[1];
        for (std::size_t i = 2; i < parts.size(); ++i) uri += "/" + parts[i];
        return serve_clip(req, service.get_clip(uri));
    }
    if (!parts.empty() && parts[0] == "sessions") {
        if (parts.size() == 1 && method == http::verb::post) {
            std::string document = req.body();
            if (is_json(req)) {
                auto j = parse_json_body(req);
                if (!j.is_object() || !j.contains("document") || !j["document"].is_string())
                    throw InputError("body needs a string \"document\"");
                document = j["document"].get<std::string>();
            }
            const auto id = service.create_session(document);
            return json_response(req, http::status::created, service.get_session(id));
        }
        if (parts.size() == 2 && get) return json_response(req, http::status::ok, service.get_session(parts[1]));
        if (parts.size() == 3 && parts[2] == "retry" && method == http::verb::post)
            return json_response(req, http::status::ok, service.retry_failed(parts[1]));
        if (parts.size() == 4 && parts[2] == "regions" && method == http::verb::patch)
            return json_response(req, http::status::ok,
                                 service.patch_region(parts[1], parts[3], parse_patch(parse_json_body(req))));
        if (parts.size() == 5 && parts[2] == "chunks" && parts[4] == "schedule" && get) {
            auto out = nlohmann::ordered_json::array();
            for (const auto& r : service.cue_schedule(parts[1], parts[3])) {
                nlohmann::ordered_json rj;
                rj["region_id"] = r.region_id;
                rj["start"] = r.start;
                rj["end"] = r.end;
                rj["clip_uri"] = r.clip_uri;
                out.push_back(std::move(rj));
            }
            return json_response(req, http::status::ok, out);
        }
    }
    return error_response(req, http::status::not_found, "no route for " + std::string(req.target()));
}

Response handle(RehearsalService& service, const Request& req) {
    try {
        return route(service, req);
    } catch (const LoadError& e) {
        return error_response(req, http::status::bad_request, e.what(), e.line());
    } catch (const NotFoundError& e) {
        return error_response(req, http::status::not_found, e.what());
    } catch (const ConflictError& e) {
        return error_response(req, http::status::conflict, e.what());
    } catch (const InputError& e) {
        return error_response(req, http::status::bad_request, e.what());
    } catch (const RangeError& e) {
        return error_response(req, http::status::bad_request, e.what());
    } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", std::string(req.method_string()), std::string(req.target()), e.what());
        return error_response(req, http::status::internal_server_error, e.what());
    }
}

void run_websocket(tcp::socket& socket, const Request& req, std::unique_ptr<RehearsalStream> stream) {
    websocket::stream<tcp::socket&> ws(socket);
    ws.set_option(websocket::stream_base::decorator(
        [](websocket::response_type& res) { res.set(http::field::server, "gcoach"); }));
    ws.accept(req);
    ws.text(true);
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
        buffer.clear();
        ws.read(buffer, ec);
        if (ec) break;
        const auto line = beast::buffers_to_string(buffer.data());
        for (const auto& out : stream->on_message(line)) {
            ws.write(asio::buffer(out), ec);
            if (ec) break;
        }
        if (ec) break;
    }
    stream->close();
    if (ws.is_open()) ws.close(websocket::close_code::normal, ec);
}

} // namespace

HttpServer::HttpServer(RehearsalService& service, const std::string& host, std::uint16_t port)
    : service_(service), impl_(std::make_unique<Impl>()) {
    const auto address = asio::ip::make_address(host);
    tcp::endpoint endpoint{address, port};
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    port_ = impl_->acceptor.local_endpoint().port();
}

HttpServer::~HttpServer() {
    stop();
}

void HttpServer::run() {
    while (!impl_->stopping) {
        tcp::socket socket{impl_->io};
        beast::error_code ec;
        impl_->acceptor.accept(socket, ec);
        if (ec) {
            if (impl_->stopping) break;
            spdlog::warn("accept: {}", ec.message());
            continue;
        }
        int id;
        {
            std::lock_guard lock(impl_->mutex);
            if (impl_->stopping) break;
            id = impl_->next_id++;
            impl_->connections.emplace(id, std::move(socket));
        }
        std::thread([this, id] { serve_connection(id); }).detach();
    }
}

void HttpServer::serve_connection(int id) {
    tcp::socket* socket;
    {
        std::lock_guard lock(impl_->mutex);
        socket = &impl_->connections.at(id);
    }
    try {
        beast::flat_buffer buffer;
        for (;;) {
            http::request_parser<http::string_body> parser;
            parser.body_limit(16 * 1024 * 1024);
            beast::error_code ec;
            http::read(*socket, buffer, parser, ec);
            if (ec) break;
            Request req = parser.release();

            if (websocket::is_upgrade(req)) {
                const auto parts = split_path(sv(req.target()));
                if (parts.size() == 5 && parts[0] == "sessions" && parts[2] == "chunks" && parts[4] == "rehearse") {
                    std::unique_ptr<RehearsalStream> stream;
                    Response refusal;
                    try {
                        stream = service_.open_stream(parts[1], parts[3]);
                    } catch (const NotFoundError& e) {
                        refusal = error_response(req, http::status::not_found, e.what());
                    } catch (const ConflictError& e) {
                        refusal = error_response(req, http::status::conflict, e.what());
                    }
                    if (stream) {
                        run_websocket(*socket, req, std::move(stream));
                    } else {
                        refusal.keep_alive(false);
                        http::write(*socket, refusal, ec);
                    }
                } else {
                    auto res = error_response(req, http::status::not_found, "no websocket route");
                    res.keep_alive(false);
                    http::write(*socket, res, ec);
                }
                break;
            }

            auto res = handle(service_, req);
            spdlog::debug("{} {} -> {}", std::string(req.method_string()), std::string(req.target()),
                          res.result_int());
            http::write(*socket, res, ec);
            if (ec || !res.keep_alive()) break;
        }
    } catch (const std::exception& e) {
        spdlog::debug("connection ended: {}", e.what());
    }
    beast::error_code ignored;
    std::lock_guard lock(impl_->mutex);
    socket->shutdown(tcp::socket::shutdown_both, ignored);
    socket->close(ignored);
    impl_->connections.erase(id);
    impl_->idle.notify_all();
}

void HttpServer::stop() {
    if (!impl_) return;
    std::unique_lock lock(impl_->mutex);
    if (!impl_->stopping.exchange(true)) {
        // A blocking accept or read only returns once its socket is shut down.
        ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
        for (auto& [id, socket] : impl_->connections) ::shutdown(socket.native_handle(), SHUT_RDWR);
    }
    impl_->idle.wait(lock, [&] { return impl_->connections.empty(); });
}

} // namespace gcoach
