#pragma once

#include "pearl/frontdoor/session.hpp"

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace pearl::frontdoor {

inline constexpr int kApiVersion = 1;

// JSON façade over one ProjectSession. Handlers only translate requests into
// session calls and session errors into status codes.
class ApiServer {
public:
    explicit ApiServer(ProjectSession& session, std::string cors_origin = "*");
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Binds and serves until stop(). Port 0 picks a free port.
    bool listen(const std::string& host, int port);
    // Binds without serving; returns the bound port or -1.
    int bind(const std::string& host, int port);
    // Serves on a socket from bind(). Blocks until stop().
    bool serve();
    void stop();
    void wait_until_ready() const;

private:
    void routes();

    ProjectSession& session_;
    std::string cors_origin_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace pearl::frontdoor
