#pragma once

// HTTP/JSON front end over an Engine.
//
//   POST /manuals            annotation -> 201 {manual_id}; 422 invalid; 409 duplicate
//   POST /manuals/{id}/ask   {question, overrides?} -> 200 AskResponse; 400; 404
//   GET  /manuals/{id}/graph canonical graph JSON; 404
//   GET  /healthz            {status, fingerprint, manuals}

#include <memory>
#include <string>

#include "care/engine.hpp"
#include "care/error.hpp"

namespace httplib {
class Server;
}

namespace care {

/// Status code for a domain error.
int http_status(ErrorCode code);

class Service {
public:
    /// `ui_dir`, when set, is served as static files under /ui/.
    explicit Service(Engine& engine, std::string ui_dir = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port,
    /// or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen();
    void stop();
    void wait_until_ready() const;

private:
    Engine& engine_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace care
