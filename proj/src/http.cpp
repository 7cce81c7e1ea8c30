#include <charconv>

#include "httplib.h"

#include "flowmoods/service.hpp"

namespace flowmoods {

using nlohmann::json;

namespace {

void send(httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
}

// Empty bodies are treated as {}.
std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        send(res, error_reply(Error(ErrorCode::parse_error, std::string("malformed JSON body: ") + e.what())));
        return std::nullopt;
    }
}

}  // namespace

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;
    explicit Impl(Service& s) : service(s) {}
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    auto& svc = impl_->service;
    svr.new_task_queue = [] { return new httplib::ThreadPool(32); };
    svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    svr.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    svr.Get("/v1/moods", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.moods()); });
    svr.Get("/v1/health", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
    svr.Post("/v1/session", [&svc](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, svc.start(*body));
    });
    svr.Post(R"(/v1/session/([^/]+)/next)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.next(req.matches[1]));
    });
    svr.Post(R"(/v1/session/([^/]+)/feedback)", [&svc](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, svc.feedback(req.matches[1], *body));
    });
    svr.Get(R"(/v1/session/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get(req.matches[1]));
    });
    svr.Post("/v1/admin/reload", [&svc](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, svc.reload(*body));
    });
    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"code", "internal"}, {"message", message}}.dump(), "application/json");
    });
    svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            res.set_content(json{{"code", "not_found"}, {"message", "no route for " + req.method + " " + req.path}}.dump(),
                            "application/json");
        }
    });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    auto& svr = impl_->server;
    if (port == 0) {
        const int bound = svr.bind_to_any_port(host);
        if (bound < 0) throw Error(ErrorCode::io_error, "cannot bind to " + host);
        return bound;
    }
    if (!svr.bind_to_port(host, port)) {
        throw Error(ErrorCode::io_error, "cannot bind to " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::mount_static(const std::filesystem::path& dir) {
    if (!impl_->server.set_mount_point("/", dir.string())) {
        throw Error(ErrorCode::io_error, "cannot serve " + dir.string() + ": not a directory");
    }
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

std::pair<std::string, int> parse_listen_address(const std::string& text) {
    std::string host = "127.0.0.1";
    std::string port_text = text;
    if (const auto colon = text.rfind(':'); colon != std::string::npos) {
        host = text.substr(0, colon);
        port_text = text.substr(colon + 1);
    }
    int port = -1;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535 || host.empty()) {
        throw Error(ErrorCode::invalid_argument, "listen address '" + text + "' is not host:port");
    }
    return {host, port};
}

}  // namespace flowmoods
