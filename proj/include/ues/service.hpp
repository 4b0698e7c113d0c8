#pragma once

// Elicitation service: session lifecycle and scoring over the store, plus an
// HTTP JSON front end.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "ues/error.hpp"
#include "ues/evaluation.hpp"
#include "ues/store.hpp"

namespace ues {

class SessionService {
 public:
  using Clock = std::function<double()>;

  explicit SessionService(std::shared_ptr<Store> store, Clock clock = now_seconds, unsigned sim_threads = 1)
      : store_(std::move(store)), clock_(std::move(clock)), sim_threads_(sim_threads) {}

  Store& store() { return *store_; }

  nlohmann::json list_scenes() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& id : store_->scene_ids()) {
      try {
        const auto s = store_->scene(id);
        out.push_back({{"id", id},
                       {"width", s.bundle->map.width},
                       {"height", s.bundle->map.height},
                       {"areas", s.bundle->areas.size()}});
      } catch (const Error&) {
        // An unreadable bundle in the store is skipped rather than failing the listing.
      }
    }
    return out;
  }

  /// Areas and map only; waypoints are an internal detail of the robot.
  nlohmann::json get_scene(const std::string& id) const {
    const auto s = store_->scene(id);
    nlohmann::json doc = scene_to_json(*s.bundle);
    doc.erase("waypoints");
    doc.erase("nav_edges");
    doc["id"] = id;
    return doc;
  }

  nlohmann::json create_session(const std::string& scene_id, const std::string& interface_tag,
                                std::optional<std::string> truth_id = std::nullopt) {
    const auto scene = store_->scene(scene_id);
    Session s;
    s.id = new_token();
    s.scene_id = scene_id;
    s.interface_kind = parse_interface(interface_tag);
    s.created = clock_();
    if (truth_id) {
      store_->truth(*truth_id, scene.bundle.get());
      s.truth_id = std::move(truth_id);
    }
    store_->save_session(s);
    return session_to_json(s);
  }

  nlohmann::json get_session(const std::string& id) const { return session_to_json(store_->session(id)); }

  nlohmann::json put_insight(const std::string& session_id, const std::string& object_id, const nlohmann::json& body) {
    std::lock_guard lock(session_mutex(session_id));
    Session s = store_->session(session_id);
    if (s.state == SessionState::Submitted) {
      throw Error(ErrorCode::SessionSubmitted, "session '" + session_id + "' is submitted and immutable");
    }
    const InsightPayload payload = parse_insight_payload(body);
    if (object_of(payload) != object_id) throw Error(ErrorCode::MalformedPayload, "object_id does not match the URL");
    if (interface_of(payload) != s.interface_kind) {
      throw Error(ErrorCode::MalformedPayload, "payload interface does not match session interface");
    }
    const auto scene = store_->scene(s.scene_id);
    if (object_id != scene.bundle->task.carried && object_id != scene.bundle->task.container) {
      throw Error(ErrorCode::UnknownObject, "scene task has no object '" + object_id + "'");
    }
    validate_payload(payload, scene.bundle->map);
    s.insight[object_id] = body;
    store_->save_session(s);
    return body;
  }

  nlohmann::json get_insight(const std::string& session_id, const std::string& object_id) const {
    const Session s = store_->session(session_id);
    auto it = s.insight.find(object_id);
    if (it == s.insight.end()) throw Error(ErrorCode::UnknownObject, "no insight stored for '" + object_id + "'");
    return it->second;
  }

  nlohmann::json submit(const std::string& session_id) {
    std::lock_guard lock(session_mutex(session_id));
    Session s = store_->session(session_id);
    if (s.state == SessionState::Submitted) {
      throw Error(ErrorCode::SessionSubmitted, "session '" + session_id + "' was already submitted");
    }
    s.state = SessionState::Submitted;
    s.submitted = std::max(clock_(), s.created);
    store_->save_session(s);
    return session_to_json(s);
  }

  /// Idempotent per (session, truth, seed, n_sims): a stored row is returned as is.
  nlohmann::json simulate(const std::string& session_id, const std::string& truth_id, std::size_t n_sims,
                          std::uint64_t seed) {
    if (n_sims < 1) throw Error(ErrorCode::InvalidArgument, "n_sims must be positive");
    const Session s = store_->session(session_id);
    const std::string key = Store::report_key(session_id, truth_id, seed, n_sims);
    std::lock_guard lock(session_mutex(session_id));
    if (auto existing = store_->find_report(key)) return score_row_to_json(*existing);
    const ScoreRow row = simulate_session(*store_, s, truth_id, n_sims, seed, sim_threads_);
    store_->save_report(key, row);
    return score_row_to_json(row);
  }

  nlohmann::json reports() const { return report_aggregate_json(aggregate_report(store_->reports())); }

 private:
  std::mutex& session_mutex(const std::string& id) {
    std::lock_guard lock(mutexes_guard_);
    auto& m = session_mutexes_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  std::shared_ptr<Store> store_;
  Clock clock_;
  unsigned sim_threads_;
  std::mutex mutexes_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mutexes_;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownScene:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownTruth:
    case ErrorCode::UnknownObject:
    case ErrorCode::UnknownArea:
    case ErrorCode::UnknownWaypoint:
      return 404;
    case ErrorCode::SessionSubmitted:
    case ErrorCode::SessionOpen:
      return 409;
    case ErrorCode::EmptyInsight:
    case ErrorCode::InsightExhausted:
    case ErrorCode::InsufficientCandidates:
      return 422;
    case ErrorCode::StoreUnavailable:
    case ErrorCode::BindFailure:
      return 500;
    default:
      return 400;
  }
}

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::string store = "ues-store";
  std::vector<std::string> scenes;
  std::optional<std::string> static_dir;
  unsigned sim_threads = 1;
};

class HttpService {
 public:
  HttpService(std::shared_ptr<SessionService> service, std::optional<std::string> static_dir = std::nullopt)
      : service_(std::move(service)) {
    if (static_dir) server_.set_mount_point("/", *static_dir);
    install_routes();
  }

  /// Binds the listening socket; returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port = server_.bind_to_any_port(host);
      if (port < 0) throw Error(ErrorCode::BindFailure, "cannot bind " + host);
    } else if (!server_.bind_to_port(host, port)) {
      throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
  }

  /// Serves until stop() is called.
  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        const nlohmann::json body = f(req, res);
        if (res.status == -1 || res.status == 0) res.status = 200;
        res.set_content(body.dump(), "application/json");
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(nlohmann::json{{"code", std::string(to_string(e.code()))}, {"message", e.detail()}}.dump(),
                        "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"code", "MalformedPayload"}, {"message", e.what()}}.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(nlohmann::json{{"code", "Internal"}, {"message", e.what()}}.dump(), "application/json");
      }
    };
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedPayload, std::string("request body is not JSON: ") + e.what());
    }
  }

  void install_routes() {
    auto svc = service_;
    server_.Get("/api/scenes", guarded([svc](const auto&, auto&) { return svc->list_scenes(); }));
    server_.Get(R"(/api/scenes/([^/]+))",
                guarded([svc](const httplib::Request& req, auto&) { return svc->get_scene(req.matches[1]); }));
    server_.Post("/api/sessions", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                   const auto body = parse_body(req);
                   if (!body.is_object() || !body.contains("scene_id") || !body.contains("interface")) {
                     throw Error(ErrorCode::InvalidArgument, "scene_id and interface are required");
                   }
                   std::optional<std::string> truth;
                   if (body.contains("truth_id")) truth = body.at("truth_id").get<std::string>();
                   auto out = svc->create_session(body.at("scene_id").get<std::string>(),
                                                  body.at("interface").get<std::string>(), truth);
                   res.status = 201;
                   return out;
                 }));
    server_.Get(R"(/api/sessions/([^/]+))",
                guarded([svc](const httplib::Request& req, auto&) { return svc->get_session(req.matches[1]); }));
    server_.Get(R"(/api/sessions/([^/]+)/insight/([^/]+))", guarded([svc](const httplib::Request& req, auto&) {
                  return svc->get_insight(req.matches[1], req.matches[2]);
                }));
    server_.Put(R"(/api/sessions/([^/]+)/insight/([^/]+))", guarded([svc](const httplib::Request& req, auto&) {
                  return svc->put_insight(req.matches[1], req.matches[2], parse_body(req));
                }));
    server_.Post(R"(/api/sessions/([^/]+)/submit)",
                 guarded([svc](const httplib::Request& req, auto&) { return svc->submit(req.matches[1]); }));
    server_.Post("/api/simulate", guarded([svc](const httplib::Request& req, auto&) {
                   const auto body = parse_body(req);
                   if (!body.is_object() || !body.contains("session_id") || !body.contains("truth_id")) {
                     throw Error(ErrorCode::InvalidArgument, "session_id and truth_id are required");
                   }
                   const auto n_sims = body.value("n_sims", std::int64_t{50});
                   if (n_sims < 1) throw Error(ErrorCode::InvalidArgument, "n_sims must be positive");
                   return svc->simulate(body.at("session_id").get<std::string>(),
                                        body.at("truth_id").get<std::string>(), static_cast<std::size_t>(n_sims),
                                        body.value("seed", std::uint64_t{0}));
                 }));
    server_.Get("/api/reports", guarded([svc](const auto&, auto&) { return svc->reports(); }));
  }

  std::shared_ptr<SessionService> service_;
  httplib::Server server_;
};

}  // namespace ues
