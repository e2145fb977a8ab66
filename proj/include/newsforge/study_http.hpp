#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "newsforge/error.hpp"
#include "newsforge/study.hpp"

namespace httplib {
class Server;
}

namespace newsforge {

/// HTTP status used for a study error code.
int http_status_for(ErrorCode code);

/// JSON API over a StudyService, plus an optional static mount for the
/// annotation UI bundle.
///
///   POST /api/sessions                 {"annotator_id", "fake", "real", "seed", "groups"}
///   GET  /api/sessions/{id}/next       [?phase=authenticity|comparison]
///   POST /api/sessions/{id}/scores     {"task_ref", "phase", "scores": {...}}
///   GET  /api/sessions/{id}/progress
///   GET  /api/aggregate                ?group_by=strategy|group [&session_id=] [&annotator_id=]
///
/// Errors come back as {"error": <code>, "message": <text>}.
class StudyHttpServer {
public:
    StudyHttpServer(StudyService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
    ~StudyHttpServer();

    /// Binds an ephemeral port and returns it (-1 on failure).
    int bind_any_port(const std::string& host = "127.0.0.1");
    bool bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    bool is_running() const;
    void wait_until_ready() const;

private:
    void install_routes(std::optional<std::filesystem::path> ui_dir);

    StudyService& service_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace newsforge
