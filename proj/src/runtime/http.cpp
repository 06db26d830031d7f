#include "vicsim/runtime.hpp"

#include <httplib.h>

#include "vicsim/error.hpp"

namespace vicsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw std::invalid_argument("request body must be a JSON object");
  return body;
}

// Runs handler, mapping library errors onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const NotFound& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const InvalidArgument& e) {
    send_error(res, 422, "invalid", e.what());
  } catch (const BackendUnavailable& e) {
    send_error(res, 503, "backend_unavailable", e.what());
  } catch (const BackendFailure& e) {
    send_error(res, 503, "backend_failure", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

struct HttpService::Impl {
  SessionManager& manager;
  httplib::Server server;

  explicit Impl(SessionManager& m) : manager(m) {}
};

HttpService::HttpService(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {
  auto& svr = impl_->server;
  auto& mgr = impl_->manager;

  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  svr.Get("/healthz", [&mgr](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200,
              {{"status", "ok"}, {"sessions", mgr.size()}, {"generator", mgr.backends().generator->name()}});
  });

  svr.Post("/sessions", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      auto it = body.find("scenario");
      if (it == body.end() || !it->is_string()) throw InvalidArgument("scenario must be a string");
      std::optional<SessionOptions> options;
      if (auto o = body.find("options"); o != body.end() && !o->is_null()) {
        options = SessionOptions::from_json(*o);
      }
      const auto s = mgr.create(it->get<std::string>(), options);
      send_json(res, 201, {{"session_id", s.id}, {"keywords", keywords_json(s.scenario.keywords)}});
    });
  });

  svr.Post(R"(/sessions/([^/]+)/messages)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      auto it = body.find("text");
      if (it == body.end() || !it->is_string()) throw InvalidArgument("text must be a string");
      send_json(res, 200, mgr.post(req.matches[1], it->get<std::string>()).to_json());
    });
  });

  svr.Get(R"(/sessions/([^/]+)/debrief)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, mgr.debrief(req.matches[1])); });
  });

  svr.Get(R"(/sessions/([^/]+))", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, mgr.get(req.matches[1]).to_json()); });
  });

  svr.Delete(R"(/sessions/([^/]+))", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      mgr.remove(req.matches[1]);
      res.status = 204;
    });
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpService::serve() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpService::running() const { return impl_->server.is_running(); }

}  // namespace vicsim
