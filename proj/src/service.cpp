#include "care/service.hpp"

#include <chrono>

#include <httplib.h>
#include <json.hpp>

namespace care {

using nlohmann::json;
using nlohmann::ordered_json;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownManual: return 404;
        case ErrorCode::DuplicateManual: return 409;
        case ErrorCode::InvalidArgument: return 400;
        case ErrorCode::Io:
        case ErrorCode::DivergenceDetected:
        case ErrorCode::GraphFrozen:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::GeometryMismatch:
        case ErrorCode::EncoderMismatch: return 500;
        default: return 422;  // anything wrong with a submitted document
    }
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, ordered_json{{"error", code}, {"message", message}});
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.message());
    } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
    }
}

// Request bodies are JSON; a syntax error reports the byte offset.
json parse_body(const httplib::Request& req, ErrorCode code) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(code, "body: byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

}  // namespace

Service::Service(Engine& engine, std::string ui_dir) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;

    s.Post("/manuals", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json doc = parse_body(req, ErrorCode::MalformedDocument);
            const std::string id = engine_.add_manual(doc);
            send_json(res, 201, ordered_json{{"manual_id", id}});
        });
    });

    s.Post(R"(/manuals/([^/]+)/ask)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto t0 = std::chrono::steady_clock::now();
            const std::string id = req.matches[1];
            const auto state = engine_.snapshot();
            // Unknown manual wins over a bad body: 404 before 400.
            if (!state->manuals.count(id)) throw Error(ErrorCode::UnknownManual, "no manual '" + id + "'");
            const json body = parse_body(req, ErrorCode::InvalidArgument);
            if (!body.is_object() || !body.contains("question") || !body["question"].is_string())
                throw Error(ErrorCode::InvalidArgument, "body must hold a string 'question'");
            const auto base = state->params->inference;
            const auto options = apply_overrides(body.value("overrides", json()), base);
            ordered_json out = engine_.ask(id, body["question"].get<std::string>(), options);
            out["timing_ms"] =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            send_json(res, 200, out);
        });
    });

    s.Get(R"(/manuals/([^/]+)/graph)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            res.status = 200;
            res.set_content(engine_.graph_json(req.matches[1].str()), "application/json");
        });
    });

    s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, engine_.health()); });
    });

    if (!ui_dir.empty() && !s.set_mount_point("/ui", ui_dir))
        throw Error(ErrorCode::Io, "cannot serve ui directory " + ui_dir);
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

bool Service::listen() { return server_->listen_after_bind(); }

void Service::stop() {
    if (server_) server_->stop();
}

void Service::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace care
