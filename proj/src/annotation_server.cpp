#include "hvaudit/annotation_server.hpp"

#include <httplib.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hvaudit/error.hpp"

namespace hvaudit {

using nlohmann::json;

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownAnnotator: return 404;
    case ErrorCode::kNotAssigned:
    case ErrorCode::kNotInDisagreement: return 409;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

void reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json preference_json(const Preference& p) {
  return {{"pref_id", p.pref_id}, {"source", to_string(p.source)}, {"role", to_string(p.role)}, {"text", p.text}};
}

json progress_json(const Progress& p) { return {{"labeled", p.labeled}, {"assigned", p.assigned}}; }

// Runs `fn`, translating library and parse errors into JSON error replies.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply(res, {{"error", error_code_name(e.code())}, {"message", e.what()}}, status_for(e.code()));
  } catch (const json::exception& e) {
    reply(res, {{"error", "BadRequest"}, {"message", e.what()}}, 400);
  }
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::routes() {
  auto& s = *server_;

  s.Get("/api/taxonomy", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, store_.taxonomy().to_json());
  });

  s.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("annotator")) {
        reply(res, {{"error", "BadRequest"}, {"message", "missing 'annotator' parameter"}}, 400);
        return;
      }
      const auto t = store_.next_task(req.get_param_value("annotator"));
      json body = {{"done", !t.item.has_value()}, {"progress", progress_json(t.progress)}};
      if (t.item) {
        body["task"] = preference_json(*t.item);
        body["index"] = t.index;
      }
      reply(res, body);
    });
  });

  s.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto ack = store_.submit_label(body.at("annotator").get<std::string>(),
                                           body.at("pref_id").get<std::string>(), body.at("label").get<LabelId>());
      json out = {{"ok", true},
                  {"event_id", ack.event_id},
                  {"progress", progress_json(ack.progress)},
                  {"overlap", ack.overlap}};
      if (ack.agreement) out["agreement"] = ack.agreement->to_json();
      reply(res, out);
    });
  });

  s.Get("/api/agreement", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, store_.live_agreement().to_json());
  });

  s.Get("/api/disagreements", [this](const httplib::Request&, httplib::Response& res) {
    json items = json::array();
    for (const auto& d : store_.disagreements()) items.push_back({{"pref_id", d.pref_id}, {"labels", d.labels}});
    reply(res, {{"items", items}});
  });

  s.Post("/api/adjudications", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto id = store_.adjudicate(body.at("adjudicator").get<std::string>(), body.at("pref_id").get<std::string>(),
                                        body.at("label").get<LabelId>(), body.value("note", std::string{}));
      reply(res, {{"ok", true}, {"event_id", id}});
    });
  });

  s.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, store_.export_ground_truth().to_json(store_.taxonomy()));
  });
}

int AnnotationServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("annotation server listening on {}:{}", host, bound);
  return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
  spdlog::info("annotation server listening on {}:{}", host, port);
  if (!server_->listen(host, port)) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
}

void AnnotationServer::stop() {
  if (server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace hvaudit
