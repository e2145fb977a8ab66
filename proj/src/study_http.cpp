#include "newsforge/study_http.hpp"

#include <httplib.h>

#include "newsforge/error.hpp"

namespace newsforge {

using nlohmann::json;

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownArticle:
            return 404;
        case ErrorCode::SessionComplete:
        case ErrorCode::PhaseLocked:
        case ErrorCode::DuplicateSubmission:
        case ErrorCode::WrongTask:
            return 409;
        case ErrorCode::InsufficientArticles:
        case ErrorCode::EmptyGroup:
            return 422;
        case ErrorCode::IoFailure:
            return 500;
        default:
            return 400;
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        send_json(res, http_status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
    } catch (const json::exception& e) {
        send_json(res, 400, {{"error", "InvalidArgument"}, {"message", e.what()}});
    }
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
}

std::optional<StudyPhase> phase_param(const httplib::Request& req) {
    if (!req.has_param("phase")) return std::nullopt;
    const auto v = req.get_param_value("phase");
    if (v == "authenticity") return StudyPhase::Authenticity;
    if (v == "comparison") return StudyPhase::Comparison;
    throw Error(ErrorCode::InvalidArgument, "unknown phase '" + v + "'");
}

}  // namespace

StudyHttpServer::StudyHttpServer(StudyService& service, std::optional<std::filesystem::path> ui_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    install_routes(std::move(ui_dir));
}

StudyHttpServer::~StudyHttpServer() { stop(); }

void StudyHttpServer::install_routes(std::optional<std::filesystem::path> ui_dir) {
    auto& svc = service_;

    server_->Post("/api/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            SessionRequest r;
            r.annotator_id = body.value("annotator_id", std::string("anonymous"));
            r.fake = body.value("fake", 80);
            r.real = body.value("real", 10);
            r.seed = body.value("seed", std::uint64_t{0});
            r.groups = body.value("groups", std::vector<std::string>{});
            const auto s = svc.create_session(r);
            send_json(res, 201, {{"session_id", s.session_id},
                                 {"authenticity_tasks", s.phase1_tasks.size()},
                                 {"comparison_tasks", s.phase2_tasks.size()}});
        });
    });

    server_->Get(R"(/api/sessions/([^/]+)/next)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, svc.next_task(req.matches[1], phase_param(req))); });
    });

    server_->Post(R"(/api/sessions/([^/]+)/scores)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            const std::string task_ref = body.at("task_ref").get<std::string>();
            // The phase follows the task reference unless stated explicitly.
            auto phase = task_ref.rfind("p2-", 0) == 0 ? StudyPhase::Comparison : StudyPhase::Authenticity;
            if (body.contains("phase"))
                phase = body.at("phase").get<std::string>() == "comparison" ? StudyPhase::Comparison
                                                                            : StudyPhase::Authenticity;
            const auto scores = MetricScores::from_json(body.at("scores"), phase);
            send_json(res, 200, svc.submit_scores(req.matches[1], task_ref, scores));
        });
    });

    server_->Get(R"(/api/sessions/([^/]+)/progress)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, svc.progress(req.matches[1])); });
    });

    server_->Get("/api/aggregate", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            AnnotationFilter filter;
            if (req.has_param("session_id")) filter.session_id = req.get_param_value("session_id");
            if (req.has_param("annotator_id")) filter.annotator_id = req.get_param_value("annotator_id");
            const auto by = req.has_param("group_by") ? req.get_param_value("group_by") : std::string("group");
            if (by != "group" && by != "strategy")
                throw Error(ErrorCode::InvalidArgument, "group_by must be 'group' or 'strategy'");
            const auto rows = svc.aggregate(filter, by == "strategy" ? GroupBy::Strategy : GroupBy::Group);
            send_json(res, 200, {{"group_by", by}, {"rows", to_json(rows)}});
        });
    });

    if (ui_dir && std::filesystem::is_directory(*ui_dir)) server_->set_mount_point("/", ui_dir->string());
}

int StudyHttpServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool StudyHttpServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool StudyHttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void StudyHttpServer::stop() {
    if (server_) server_->stop();
}

bool StudyHttpServer::is_running() const { return server_->is_running(); }

void StudyHttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace newsforge
