#pragma once

// File-backed document store: scene bundles, sessions, ground truths and
// score reports under one root directory. Every write goes to a temporary
// file in the same directory and is renamed into place.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ues/error.hpp"
#include "ues/evaluation.hpp"
#include "ues/insight.hpp"
#include "ues/planner.hpp"
#include "ues/scene.hpp"

namespace ues {

namespace fs = std::filesystem;

inline void atomic_write(const fs::path& path, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::StoreUnavailable, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::StoreUnavailable, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::StoreUnavailable, "cannot replace " + path.string());
  }
}

/// Ids become file names, so only a conservative character set is accepted.
inline bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

enum class SessionState { Open, Submitted };

struct Session {
  std::string id;
  std::string scene_id;
  InterfaceKind interface_kind = InterfaceKind::Precision;
  SessionState state = SessionState::Open;
  double created = 0.0;  // seconds since the epoch
  std::optional<double> submitted;
  std::optional<std::string> truth_id;
  std::map<std::string, nlohmann::json> insight;  // raw payloads by object id

  double duration_s() const { return submitted ? std::max(0.0, *submitted - created) : 0.0; }
};

inline nlohmann::json session_to_json(const Session& s) {
  nlohmann::json j = {{"id", s.id},
                      {"scene_id", s.scene_id},
                      {"interface", std::string(to_string(s.interface_kind))},
                      {"state", s.state == SessionState::Open ? "open" : "submitted"},
                      {"created", s.created},
                      {"insight", nlohmann::json::object()}};
  j["submitted"] = s.submitted ? nlohmann::json(*s.submitted) : nlohmann::json(nullptr);
  j["duration_s"] = s.duration_s();
  if (s.truth_id) j["truth_id"] = *s.truth_id;
  for (const auto& [object, payload] : s.insight) j["insight"][object] = payload;
  return j;
}

inline Session session_from_json(const nlohmann::json& j) {
  try {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.scene_id = j.at("scene_id").get<std::string>();
    s.interface_kind = parse_interface(j.at("interface").get<std::string>());
    const auto state = j.at("state").get<std::string>();
    if (state != "open" && state != "submitted") throw Error(ErrorCode::StoreUnavailable, "bad session state");
    s.state = state == "open" ? SessionState::Open : SessionState::Submitted;
    s.created = j.at("created").get<double>();
    if (j.contains("submitted") && !j.at("submitted").is_null()) s.submitted = j.at("submitted").get<double>();
    if (j.contains("truth_id")) s.truth_id = j.at("truth_id").get<std::string>();
    for (const auto& [object, payload] : j.at("insight").items()) s.insight[object] = payload;
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedPayload, std::string("corrupt session document: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedPayload, "corrupt session document: " + e.detail());
  }
}

inline SessionRecord session_record(const Session& s) {
  SessionRecord r;
  r.session_id = s.id;
  r.interface_kind = s.interface_kind;
  r.duration_s = s.duration_s();
  for (const auto& [object, payload] : s.insight) r.payloads.emplace(object, parse_insight_payload(payload));
  return r;
}

/// A scene together with its Voronoi partition; shared read-only.
struct LoadedScene {
  std::string id;
  std::shared_ptr<const SceneBundle> bundle;
  std::shared_ptr<const VoronoiAssignment> assignment;
};

inline LoadedScene load_scene_with_cells(const fs::path& path, std::string id) {
  LoadedScene loaded;
  loaded.id = std::move(id);
  loaded.bundle = std::make_shared<const SceneBundle>(load_scene_file(path));
  loaded.assignment = std::make_shared<const VoronoiAssignment>(voronoi_assign(loaded.bundle));
  return loaded;
}

class Store {
 public:
  explicit Store(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    for (const char* sub : {"scenes", "sessions", "truths", "reports"}) {
      fs::create_directories(root_ / sub, ec);
      if (ec || !fs::is_directory(root_ / sub)) {
        throw Error(ErrorCode::StoreUnavailable, "cannot create store directory " + (root_ / sub).string());
      }
    }
  }

  const fs::path& root() const { return root_; }

  /// Makes a bundle outside the store visible under `id` (defaults to the file stem).
  void register_scene(const fs::path& path, std::optional<std::string> id = std::nullopt) {
    const std::string scene_id = id.value_or(path.stem().string());
    if (!valid_id(scene_id)) throw Error(ErrorCode::InvalidArgument, "invalid scene id '" + scene_id + "'");
    load_scene_file(path);
    std::lock_guard lock(mutex_);
    extra_scenes_[scene_id] = path;
    scene_cache_.erase(scene_id);
  }

  std::vector<std::string> scene_ids() const {
    std::set<std::string> ids;
    {
      std::lock_guard lock(mutex_);
      for (const auto& [id, path] : extra_scenes_) ids.insert(id);
    }
    for (const auto& id : list_dir("scenes")) ids.insert(id);
    return {ids.begin(), ids.end()};
  }

  LoadedScene scene(const std::string& id) const {
    if (!valid_id(id)) throw Error(ErrorCode::UnknownScene, "unknown scene '" + id + "'");
    std::lock_guard lock(mutex_);
    if (auto it = scene_cache_.find(id); it != scene_cache_.end()) return it->second;
    fs::path path = root_ / "scenes" / (id + ".json");
    if (auto it = extra_scenes_.find(id); it != extra_scenes_.end()) path = it->second;
    if (!fs::exists(path)) throw Error(ErrorCode::UnknownScene, "unknown scene '" + id + "'");
    LoadedScene loaded = load_scene_with_cells(path, id);
    scene_cache_[id] = loaded;
    return loaded;
  }

  std::optional<Session> find_session(const std::string& id) const {
    if (!valid_id(id)) return std::nullopt;
    const fs::path path = root_ / "sessions" / (id + ".json");
    if (!fs::exists(path)) return std::nullopt;
    return session_from_json(parse_document(path, ErrorCode::UnknownSession));
  }

  Session session(const std::string& id) const {
    if (auto s = find_session(id)) return *s;
    throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
  }

  void save_session(const Session& s) const {
    atomic_write(root_ / "sessions" / (s.id + ".json"), session_to_json(s).dump(2) + "\n");
  }

  std::vector<std::string> session_ids() const { return list_dir("sessions"); }

  GroundTruth truth(const std::string& id, const SceneBundle* scene = nullptr) const {
    const fs::path path = root_ / "truths" / (id + ".json");
    if (!valid_id(id) || !fs::exists(path)) throw Error(ErrorCode::UnknownTruth, "unknown truth '" + id + "'");
    return parse_ground_truth(parse_document(path, ErrorCode::UnknownTruth), scene);
  }

  void save_truth(const std::string& id, const GroundTruth& truth) const {
    if (!valid_id(id)) throw Error(ErrorCode::InvalidArgument, "invalid truth id '" + id + "'");
    atomic_write(root_ / "truths" / (id + ".json"), ground_truth_to_json(truth).dump(2) + "\n");
  }

  static std::string report_key(const std::string& session_id, const std::string& truth_id, std::uint64_t seed,
                                std::size_t n_sims) {
    return session_id + "__" + truth_id + "__" + std::to_string(seed) + "__" + std::to_string(n_sims);
  }

  std::optional<ScoreRow> find_report(const std::string& key) const {
    const fs::path path = root_ / "reports" / (key + ".json");
    if (!fs::exists(path)) return std::nullopt;
    return score_row_from_json(parse_document(path, ErrorCode::StoreUnavailable));
  }

  void save_report(const std::string& key, const ScoreRow& row) const {
    atomic_write(root_ / "reports" / (key + ".json"), score_row_to_json(row).dump(2) + "\n");
  }

  std::vector<ScoreRow> reports() const {
    std::vector<ScoreRow> rows;
    for (const auto& key : list_dir("reports")) rows.push_back(*find_report(key));
    return rows;
  }

 private:
  std::vector<std::string> list_dir(const char* sub) const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_ / sub, ec)) {
      const auto& p = entry.path();
      if (entry.is_regular_file() && p.extension() == ".json") ids.push_back(p.stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  static nlohmann::json parse_document(const fs::path& path, ErrorCode on_missing) {
    const std::string text = read_file(path, on_missing);
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::StoreUnavailable, "corrupt document " + path.string() + ": " + e.what());
    }
  }

  fs::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, fs::path> extra_scenes_;
  mutable std::map<std::string, LoadedScene> scene_cache_;
};

/// Scores a submitted session against a stored truth. Shared by the HTTP
/// service and the command-line tools so both produce identical rows.
inline ScoreRow simulate_session(const LoadedScene& scene, const Session& session, const GroundTruth& truth,
                                 const std::string& truth_id, std::size_t n_sims, std::uint64_t seed,
                                 unsigned threads = 1) {
  if (n_sims < 1) throw Error(ErrorCode::InvalidArgument, "n_sims must be positive");
  if (session.state != SessionState::Submitted) {
    throw Error(ErrorCode::SessionOpen, "session '" + session.id + "' has not been submitted");
  }
  const TaskSpec task = default_task(*scene.bundle);
  ScoreRow row = score_session(*scene.assignment, task, session_record(session), truth, n_sims, seed, threads);
  row.truth_id = truth_id;
  return row;
}

inline ScoreRow simulate_session(const Store& store, const Session& session, const std::string& truth_id,
                                 std::size_t n_sims, std::uint64_t seed, unsigned threads = 1) {
  if (session.state != SessionState::Submitted) {
    throw Error(ErrorCode::SessionOpen, "session '" + session.id + "' has not been submitted");
  }
  const LoadedScene scene = store.scene(session.scene_id);
  return simulate_session(scene, session, store.truth(truth_id, scene.bundle.get()), truth_id, n_sims, seed, threads);
}



inline double now_seconds() {
  using namespace std::chrono;
  return duration_cast<duration<double>>(system_clock::now().time_since_epoch()).count();
}

inline std::string new_token() {
  static thread_local std::mt19937_64 gen(std::random_device{}() ^
                                          static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 16; ++i) out += hex[gen() & 0xF];
  return out;
}

}  // namespace ues
