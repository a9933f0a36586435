#include <atomic>
#include <cstdlib>

#include <httplib.h>

#include "epicsim/error.hpp"
#include "epicsim/gateway.hpp"

namespace epicsim::gateway {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"ok", false}, {"error", {{"code", code}, {"message", message}}}, {"schema", kSchemaVersion}});
}

std::optional<nlohmann::json> body_json(const httplib::Request& req, httplib::Response& res) {
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        send_error(res, 400, codes::kMalformed, std::string("body is not JSON: ") + e.what());
        return std::nullopt;
    }
}

std::uint64_t param_u64(const httplib::Request& req, const std::string& key, std::uint64_t fallback) {
    if (!req.has_param(key)) return fallback;
    try {
        return std::stoull(req.get_param_value(key));
    } catch (const std::exception&) {
        fail(ErrorKind::Validation, key + ": must be a non-negative integer");
    }
}

// Internal request ids; the "http-" prefix keeps them apart from client ids.
std::string internal_id(const char* what) {
    static std::atomic<std::uint64_t> next{1};
    return std::string("http-") + what + "-" + std::to_string(next++);
}

} // namespace

ServerConfig ServerConfig::from_env() {
    ServerConfig c;
    if (const char* h = std::getenv("EPICSIM_GATEWAY_HOST")) c.host = h;
    if (const char* p = std::getenv("EPICSIM_GATEWAY_PORT")) c.port = std::atoi(p);
    return c;
}

struct Server::Impl {
    httplib::Server http;
};

Server::Server(ServerConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
    auto& http = impl_->http;
    Registry& reg = registry_;
    const SessionOptions session_opts = cfg_.session;

    const auto with_session = [&reg](const httplib::Request& req, httplib::Response& res) -> std::shared_ptr<Session> {
        auto s = reg.find(req.path_params.at("id"));
        if (!s) send_error(res, 404, "unknown_session", "no session '" + req.path_params.at("id") + "'");
        return s;
    };

    http.Get("/v1/schema", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200,
                  {{"schema", kSchemaVersion},
                   {"control_types", {"pause", "resume", "step", "intervene", "subscribe", "unsubscribe", "snapshot", "restore", "status"}},
                   {"channels", {"raster", "vm", "energy", "weights", "status"}},
                   {"framing", "decimal byte length, newline, JSON body"}});
    });

    http.Post("/v1/sessions", [&reg, session_opts](const httplib::Request& req, httplib::Response& res) {
        const auto body = body_json(req, res);
        if (!body) return;
        try {
            auto s = reg.create(*body, session_opts);
            send_json(res, 201, {{"session", s->id()}, {"token", s->controller_token()}, {"schema", kSchemaVersion}});
        } catch (const Error& e) {
            send_error(res, 400, codes::kMalformed, e.what());
        }
    });

    http.Delete("/v1/sessions/:id", [&reg](const httplib::Request& req, httplib::Response& res) {
        if (!reg.remove(req.path_params.at("id"))) return send_error(res, 404, "unknown_session", "no such session");
        send_json(res, 200, {{"ok", true}});
    });

    http.Post("/v1/sessions/:id/control", [with_session](const httplib::Request& req, httplib::Response& res) {
        auto s = with_session(req, res);
        if (!s) return;
        const auto body = body_json(req, res);
        if (!body) return;
        const Reply r = s->handle_json(*body);
        send_json(res, r.ok ? 200 : 400, r.to_json());
    });

    http.Get("/v1/sessions/:id/stream", [with_session](const httplib::Request& req, httplib::Response& res) {
        auto s = with_session(req, res);
        if (!s) return;
        std::uint64_t sub = 0, max = 0, wait_ms = 0;
        try {
            sub = param_u64(req, "subscription", 0);
            max = param_u64(req, "max", 1000);
            wait_ms = param_u64(req, "wait_ms", 1000);
        } catch (const Error& e) {
            return send_error(res, 400, codes::kMalformed, e.what());
        }
        if (!s->has_subscription(sub))
            return send_error(res, 400, codes::kUnknownSubscription, "no subscription " + std::to_string(sub));
        // Frames stream as they arrive until `max` were sent or the stream idles for wait_ms.
        res.set_chunked_content_provider("application/x-epicsim-frames", [s, sub, max, wait_ms, sent = std::uint64_t{0}](
                                                                             std::size_t, httplib::DataSink& sink) mutable {
            if (sent >= max || !s->has_subscription(sub)) {
                sink.done();
                return true;
            }
            const auto frames = s->poll(sub, static_cast<std::size_t>(max - sent), std::chrono::milliseconds(wait_ms));
            if (frames.empty()) {
                sink.done();
                return true;
            }
            for (const auto& f : frames) {
                const auto text = encode_frame(f.to_json());
                if (!sink.write(text.data(), text.size())) return false;
            }
            sent += frames.size();
            return true;
        });
    });

    http.Get("/v1/sessions/:id/snapshot", [with_session](const httplib::Request& req, httplib::Response& res) {
        auto s = with_session(req, res);
        if (!s) return;
        ControlMessage m;
        m.type = ControlType::Snapshot;
        m.request_id = internal_id("snapshot");
        const auto r = s->handle(m);
        if (!r.ok) return send_error(res, 400, r.code, r.message);
        send_json(res, 200, r.data.at("snapshot"));
    });

    http.Put("/v1/sessions/:id/snapshot", [with_session](const httplib::Request& req, httplib::Response& res) {
        auto s = with_session(req, res);
        if (!s) return;
        const auto body = body_json(req, res);
        if (!body) return;
        ControlMessage m;
        m.type = ControlType::Restore;
        m.request_id = internal_id("restore");
        m.token = req.get_header_value("X-Controller-Token");
        m.snapshot = *body;
        const auto r = s->handle(m);
        send_json(res, r.ok ? 200 : 400, r.to_json());
    });
}

Server::~Server() { stop(); }

int Server::start() {
    auto& http = impl_->http;
    int port = cfg_.port;
    if (port == 0) port = http.bind_to_any_port(cfg_.host);
    else if (!http.bind_to_port(cfg_.host, port)) port = -1;
    if (port < 0) fail(ErrorKind::Runtime, "gateway: cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    thread_ = std::thread([&http] { http.listen_after_bind(); });
    http.wait_until_ready();
    return port;
}

void Server::run() {
    if (!impl_->http.listen(cfg_.host, cfg_.port))
        fail(ErrorKind::Runtime, "gateway: cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
}

void Server::stop() {
    if (impl_) impl_->http.stop();
    if (thread_.joinable()) thread_.join();
}

} // namespace epicsim::gateway
