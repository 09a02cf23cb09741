#include "pearl/frontdoor/server.hpp"

#include "pearl/providers/mock.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace pearl::frontdoor {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, json body) {
    body["version"] = kApiVersion;
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw BadRequest(std::string("malformed JSON body: ") + e.what());
    }
}

std::size_t page_param(const httplib::Request& req) {
    const std::string& s = req.matches[1];
    try {
        return std::stoul(s);
    } catch (const std::exception&) {
        throw NotFound("no page " + s);
    }
}

std::vector<std::string> truth_from(const json& body) {
    if (body.contains("truth")) return body.at("truth").get<std::vector<std::string>>();
    if (body.contains("truth_dir")) return providers::load_ground_truth(body.at("truth_dir").get<std::string>());
    throw BadRequest("body needs truth (array of texts) or truth_dir");
}

std::optional<TranscriptKind> which_from(const json& body) {
    if (!body.contains("which") || body.at("which").is_null()) return std::nullopt;
    return transcript_kind_from_string(body.at("which").get<std::string>());
}

// Runs a handler and maps session errors to status codes.
template <typename F>
httplib::Server::Handler guarded(F&& fn) {
    return [fn = std::forward<F>(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFound& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const Conflict& e) {
            send_error(res, 409, "conflict", e.what());
        } catch (const BadRequest& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const ProjectError& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const SettingsError& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::invalid_argument& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

ApiServer::ApiServer(ProjectSession& session, std::string cors_origin)
    : session_(session), cors_origin_(std::move(cors_origin)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::routes() {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", cors_origin_},
                           {"Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
    s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/api/project", guarded([this](const httplib::Request&, httplib::Response& res) {
              send_json(res, 200, session_.project_json());
          }));

    s.Get(R"(/api/pages/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, session_.page(page_param(req)));
          }));

    s.Get(R"(/api/pages/([^/]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const auto image = session_.image(page_param(req));
              const auto data = image.data();
              res.set_content(std::string(data.begin(), data.end()), image.media_type);
          }));

    s.Put(R"(/api/pages/([^/]+)/transcript)", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const std::size_t index = page_param(req);
              const json body = parse_body(req);
              const auto which = transcript_kind_from_string(body.at("which").get<std::string>());
              send_json(res, 200, session_.edit(index, which, body.at("text").get<std::string>()));
          }));

    s.Post("/api/find-replace", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const json body = parse_body(req);
               const auto which = which_from(body).value_or(TranscriptKind::raw);
               const bool one_page = body.contains("page");
               const std::size_t n = session_.replace(
                   which, body.at("find").get<std::string>(), body.at("replace").get<std::string>(),
                   one_page ? ReplaceScope::page : ReplaceScope::all,
                   one_page ? body.at("page").get<std::size_t>() : 0);
               send_json(res, 200, {{"replacements", n}});
           }));

    s.Post("/api/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const json body = parse_body(req);
               JobRequest request;
               request.kind = body.at("kind").get<std::string>();
               request.profile = body.value("profile", std::string());
               if (body.contains("params") && !body.at("params").is_null()) {
                   json params = session_.settings().params;
                   params.merge_patch(body.at("params"));
                   request.params = params.get<GenerationParams>();
               }
               if (request.kind == "evaluate") {
                   request.truth = truth_from(body);
                   request.mode = metrics::mode_from_string(body.value("mode", std::string("strict")));
                   request.level = metrics::level_from_string(body.value("level", std::string("character")));
                   request.which = which_from(body);
               }
               send_json(res, 202, to_json(session_.start_job(request)));
           }));

    s.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, to_json(session_.job(req.matches[1])));
          }));

    s.Get("/api/settings", guarded([this](const httplib::Request&, httplib::Response& res) {
              send_json(res, 200, {{"settings", session_.settings()}});
          }));

    s.Put("/api/settings", guarded([this](const httplib::Request& req, httplib::Response& res) {
              json body = parse_body(req);
              // Accept either the bare settings object or {"settings": {...}}.
              if (body.contains("settings")) body = body.at("settings");
              body.erase("version");
              send_json(res, 200, {{"settings", session_.patch_settings(body)}});
          }));

    s.Post("/api/evaluate", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const json body = parse_body(req);
               const auto truth = truth_from(body);
               const auto e = session_.evaluate(truth, which_from(body),
                                                metrics::mode_from_string(body.value("mode", std::string("strict"))),
                                                metrics::level_from_string(body.value("level", std::string("word"))));
               send_json(res, 200, evaluation_json(e));
           }));

    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no route " + req.path);
    });
}

bool ApiServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

bool ApiServer::serve() { return server_->listen_after_bind(); }

void ApiServer::stop() {
    if (server_) server_->stop();
}

void ApiServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace pearl::frontdoor
