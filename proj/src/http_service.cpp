#include <cmath>
#include <functional>

#include "al/service.hpp"
#include "httplib.h"

namespace al {

using nlohmann::json;

namespace {

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string code, const std::string& detail)
      : std::runtime_error(detail), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

int status_for(SessionError::Code code) {
  switch (code) {
    case SessionError::Code::kNotFound: return 404;
    case SessionError::Code::kCorrupt: return 503;
    case SessionError::Code::kInvalidConfig: return 400;
    case SessionError::Code::kStaleBatch: return 409;
    case SessionError::Code::kIncompleteLabels: return 422;
    case SessionError::Code::kInvalidLabel: return 422;
    case SessionError::Code::kStorage: return 500;
  }
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
  send_json(res, status, json{{"error", code}, {"detail", detail}});
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw HttpError(400, "invalid_json", e.what());
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

httplib::Server::Handler guarded(Handler handler) {
  return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const HttpError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const SessionError& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

std::size_t parse_label(const json& value, const LabelSchema& schema, std::size_t id) {
  if (value.is_number_unsigned()) return value.get<std::size_t>();
  if (value.is_string()) {
    const auto name = value.get<std::string>();
    if (const auto index = schema.index_of(name)) return *index;
    throw SessionError(SessionError::Code::kInvalidLabel,
                       "label '" + name + "' for instance " + std::to_string(id) + " is not a class name");
  }
  throw SessionError(SessionError::Code::kInvalidLabel,
                     "label for instance " + std::to_string(id) + " must be a class index or name");
}

json session_summary(const Session& session) {
  const auto p = session.progress();
  return json{{"session_id", session.id()},
              {"status", to_string(p.status)},
              {"iteration", p.iteration},
              {"num_labeled", p.num_labeled},
              {"num_iterations", p.num_iterations}};
}

}  // namespace

struct HttpService::Impl {
  std::shared_ptr<SessionStore> store;
  httplib::Server server;

  explicit Impl(std::shared_ptr<SessionStore> s) : store(std::move(s)) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto session = store->create(body);
      send_json(res, 201, json{{"session_id", session->id()}});
    }));

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      json sessions = json::array();
      for (const auto& s : store->list()) sessions.push_back(session_summary(*s));
      json corrupt = json::array();
      for (const auto& [id, detail] : store->corrupt()) corrupt.push_back({{"session_id", id}, {"detail", detail}});
      send_json(res, 200, json{{"sessions", std::move(sessions)}, {"corrupt", std::move(corrupt)}});
    }));

    server.Get(R"(/sessions/([^/]+)/batch)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto session = store->get(req.matches[1]);
      const auto progress = session->progress();
      json instances = json::array();
      json batch_id = nullptr;
      if (progress.pending) {
        batch_id = progress.pending->batch_id;
        for (const auto id : progress.pending->ids) {
          instances.push_back({{"id", id}, {"text", session->train().at(id).text}});
        }
      }
      send_json(res, 200,
                json{{"batch_id", batch_id},
                     {"instances", std::move(instances)},
                     {"class_names", session->schema().class_names()},
                     {"status", to_string(progress.status)}});
    }));

    server.Post(R"(/sessions/([^/]+)/labels)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto session = store->get(req.matches[1]);
      const auto body = parse_body(req);
      if (!body.is_object() || !body.contains("batch_id") || !body["batch_id"].is_number_unsigned()) {
        throw HttpError(400, "invalid_request", "body needs a non-negative integer batch_id");
      }
      if (!body.contains("labels") || !body["labels"].is_array()) {
        throw HttpError(400, "invalid_request", "body needs a labels array");
      }
      std::vector<SubmittedLabel> labels;
      for (const auto& entry : body["labels"]) {
        if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_number_unsigned() ||
            !entry.contains("label")) {
          throw HttpError(400, "invalid_request", "each label needs an integer id and a label");
        }
        const auto id = entry["id"].get<std::size_t>();
        labels.push_back({id, parse_label(entry["label"], session->schema(), id)});
      }
      const auto status = session->submit_labels(body["batch_id"].get<std::size_t>(), labels, store->async_training());
      send_json(res, 200, json{{"status", to_string(status)}});
    }));

    server.Get(R"(/sessions/([^/]+)/progress)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto session = store->get(req.matches[1]);
      const auto p = session->progress();
      json curve = json::array();
      for (const auto& r : p.records) {
        json point{{"num_labeled", r.num_labeled}};
        if (p.has_accuracy && std::isfinite(r.test_accuracy)) point["accuracy"] = r.test_accuracy;
        curve.push_back(std::move(point));
      }
      json body{{"iteration", p.iteration},
                {"num_labeled", p.num_labeled},
                {"num_iterations", p.num_iterations},
                {"curve", std::move(curve)},
                {"status", to_string(p.status)}};
      if (!p.error.empty()) body["error"] = p.error;
      send_json(res, 200, body);
    }));
  }
};

HttpService::HttpService(std::shared_ptr<SessionStore> store) : impl_(std::make_unique<Impl>(std::move(store))) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace al
