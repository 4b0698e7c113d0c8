#pragma once

// Preliminary scene information: the discretized map, labeled areas,
// waypoints with their navigation graph, and the Voronoi partition of map
// pixels into per-waypoint cells.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ues/error.hpp"
#include "ues/geometry.hpp"

namespace ues {

using WaypointId = std::string;

inline constexpr int kMaxMapSide = 16384;
inline constexpr std::int64_t kMaxMapPixels = std::int64_t{1} << 26;

struct GridMap {
  int width = 1;
  int height = 1;
  double resolution = 0.05;  // meters per pixel, metadata only

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(Point p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
  }
  bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  std::size_t linear(Pixel p) const {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(p.x);
  }
  Pixel pixel_at(std::size_t linear_index) const {
    return {static_cast<int>(linear_index % static_cast<std::size_t>(width)),
            static_cast<int>(linear_index / static_cast<std::size_t>(width))};
  }
  /// Pixel containing a real-valued point; the far map edge folds into the last pixel.
  Pixel pixel_of(Point p) const {
    return {std::clamp(static_cast<int>(std::floor(p.x)), 0, width - 1),
            std::clamp(static_cast<int>(std::floor(p.y)), 0, height - 1)};
  }
};

enum class AreaKind { Region, Surface };

struct Area {
  std::string id;
  AreaKind kind = AreaKind::Region;
  std::vector<Point> polygon;
};

struct Waypoint {
  WaypointId id;
  Point position;
};

struct NavEdge {
  WaypointId a;
  WaypointId b;
  double weight = 0.0;
};

/// Optional task defaults shipped with a bundle (start waypoint, object names,
/// and the waypoints eligible to hold objects when sampling ground truth).
struct TaskDefaults {
  std::string carried = "umbrella";
  std::string container = "bag";
  std::optional<WaypointId> start;
  std::vector<WaypointId> candidates;
};

/// Path weights closer than this (relative) are treated as equal for tie-breaks.
inline bool weights_equal(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// All-pairs shortest paths over the navigation graph. Among equal-weight
/// paths the lexicographically smallest waypoint-id sequence is returned.
class NavRouter {
 public:
  struct Path {
    std::vector<WaypointId> nodes;
    double weight = 0.0;
  };

  NavRouter() = default;

  NavRouter(std::vector<WaypointId> ids, std::vector<std::vector<std::pair<std::size_t, double>>> adjacency)
      : ids_(std::move(ids)), adjacency_(std::move(adjacency)) {
    for (auto& row : adjacency_) {
      std::sort(row.begin(), row.end(),
                [this](const auto& l, const auto& r) { return ids_[l.first] < ids_[r.first]; });
    }
    const std::size_t n = ids_.size();
    dist_.assign(n * n, std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < n; ++s) run_dijkstra(s);
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<WaypointId>& ids() const { return ids_; }
  const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t i) const { return adjacency_[i]; }

  double distance(std::size_t from, std::size_t to) const { return dist_[from * ids_.size() + to]; }

  /// Node indices of the canonical shortest path, both endpoints included.
  std::vector<std::size_t> path_indices(std::size_t from, std::size_t to) const {
    std::vector<std::size_t> out{from};
    std::size_t at = from;
    while (at != to) {
      const double remaining = distance(at, to);
      std::optional<std::size_t> next;
      for (const auto& [v, w] : adjacency_[at]) {
        if (weights_equal(w + distance(v, to), remaining)) {
          next = v;  // adjacency sorted by id, first hit is the smallest
          break;
        }
      }
      if (!next || out.size() > ids_.size()) {
        throw Error(ErrorCode::DisconnectedGraph, "no route from " + ids_[from] + " to " + ids_[to]);
      }
      at = *next;
      out.push_back(at);
    }
    return out;
  }

  Path path(std::size_t from, std::size_t to) const {
    Path p;
    const auto idx = path_indices(from, to);
    p.nodes.reserve(idx.size());
    for (std::size_t i : idx) p.nodes.push_back(ids_[i]);
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) p.weight += edge_weight(idx[k], idx[k + 1]);
    return p;
  }

  double edge_weight(std::size_t a, std::size_t b) const {
    for (const auto& [v, w] : adjacency_[a]) {
      if (v == b) return w;
    }
    return std::numeric_limits<double>::infinity();
  }

 private:
  void run_dijkstra(std::size_t source) {
    const std::size_t n = ids_.size();
    double* dist = &dist_[source * n];
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    dist[source] = 0.0;
    open.emplace(0.0, source);
    while (!open.empty()) {
      const auto [d, u] = open.top();
      open.pop();
      if (d > dist[u]) continue;
      for (const auto& [v, w] : adjacency_[u]) {
        if (d + w < dist[v]) {
          dist[v] = d + w;
          open.emplace(dist[v], v);
        }
      }
    }
  }

  std::vector<WaypointId> ids_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
  std::vector<double> dist_;
};

/// Nearest-waypoint queries with a sweep over waypoints sorted by x. Exact
/// distance ties go to the lexicographically smallest id.
class WaypointLocator {
 public:
  WaypointLocator() = default;

  explicit WaypointLocator(const std::vector<Waypoint>& waypoints) {
    entries_.reserve(waypoints.size());
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
      entries_.push_back({waypoints[i].position, i, waypoints[i].id});
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& l, const Entry& r) {
      return l.pos.x < r.pos.x || (l.pos.x == r.pos.x && l.id < r.id);
    });
    xs_.reserve(entries_.size());
    for (const auto& e : entries_) xs_.push_back(e.pos.x);
  }

  std::size_t nearest(Point p) const {
    const std::size_t n = entries_.size();
    const std::size_t start =
        static_cast<std::size_t>(std::lower_bound(xs_.begin(), xs_.end(), p.x) - xs_.begin());
    double best = std::numeric_limits<double>::infinity();
    const Entry* best_entry = nullptr;
    auto consider = [&](const Entry& e) {
      const double d = squared_distance(e.pos, p);
      if (d < best || (d == best && e.id < best_entry->id)) {
        best = d;
        best_entry = &e;
      }
    };
    for (std::size_t r = start; r < n; ++r) {
      const double dx = entries_[r].pos.x - p.x;
      if (dx * dx > best) break;
      consider(entries_[r]);
    }
    for (std::size_t l = start; l-- > 0;) {
      const double dx = p.x - entries_[l].pos.x;
      if (dx * dx > best) break;
      consider(entries_[l]);
    }
    return best_entry->index;
  }

 private:
  struct Entry {
    Point pos;
    std::size_t index;
    std::string id;
  };
  std::vector<Entry> entries_;
  std::vector<double> xs_;
};

/// Immutable, validated scene. Construct through make_scene or load_scene.
class SceneBundle {
 public:
  GridMap map;
  std::vector<Area> areas;
  std::vector<Waypoint> waypoints;
  std::vector<NavEdge> nav_edges;
  TaskDefaults task;

  std::optional<std::size_t> find_waypoint(std::string_view id) const {
    auto it = waypoint_index_.find(std::string(id));
    if (it == waypoint_index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t waypoint_index(std::string_view id) const {
    if (auto i = find_waypoint(id)) return *i;
    throw Error(ErrorCode::UnknownWaypoint, "unknown waypoint '" + std::string(id) + "'");
  }
  const Area& area(std::string_view id) const {
    for (const auto& a : areas) {
      if (a.id == id) return a;
    }
    throw Error(ErrorCode::UnknownArea, "unknown area '" + std::string(id) + "'");
  }
  const NavRouter& router() const { return *router_; }
  const WaypointLocator& locator() const { return *locator_; }

 private:
  friend SceneBundle make_scene(GridMap, std::vector<Area>, std::vector<Waypoint>,
                                std::vector<std::pair<WaypointId, WaypointId>>, TaskDefaults);
  std::unordered_map<std::string, std::size_t> waypoint_index_;
  std::shared_ptr<const NavRouter> router_;
  std::shared_ptr<const WaypointLocator> locator_;
};

/// Validates every scene invariant and derives edge weights and the router.
inline SceneBundle make_scene(GridMap map, std::vector<Area> areas, std::vector<Waypoint> waypoints,
                              std::vector<std::pair<WaypointId, WaypointId>> edges,
                              TaskDefaults task = {}) {
  if (map.width < 1 || map.height < 1 || map.width > kMaxMapSide || map.height > kMaxMapSide ||
      static_cast<std::int64_t>(map.width) * map.height > kMaxMapPixels) {
    throw Error(ErrorCode::InvalidGeometry, "map dimensions out of range");
  }
  if (!std::isfinite(map.resolution) || map.resolution <= 0.0) {
    throw Error(ErrorCode::InvalidGeometry, "resolution must be positive");
  }

  std::set<std::string> area_ids;
  for (const auto& a : areas) {
    if (a.id.empty() || !area_ids.insert(a.id).second) {
      throw Error(ErrorCode::InvalidGeometry, "area ids must be unique and non-empty: '" + a.id + "'");
    }
    if (!geometry::is_simple_polygon(a.polygon)) {
      throw Error(ErrorCode::InvalidGeometry, "area '" + a.id + "' is not a simple polygon");
    }
  }

  if (waypoints.empty()) throw Error(ErrorCode::InvalidGeometry, "scene has no waypoints");
  SceneBundle scene;
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    const auto& w = waypoints[i];
    if (w.id.empty() || !scene.waypoint_index_.emplace(w.id, i).second) {
      throw Error(ErrorCode::InvalidGeometry, "waypoint ids must be unique and non-empty: '" + w.id + "'");
    }
    if (!std::isfinite(w.position.x) || !std::isfinite(w.position.y) || !map.contains(w.position)) {
      throw Error(ErrorCode::InvalidGeometry, "waypoint '" + w.id + "' lies outside the map");
    }
    const bool in_region = std::any_of(areas.begin(), areas.end(), [&](const Area& a) {
      return a.kind == AreaKind::Region && geometry::contains(a.polygon, w.position);
    });
    if (!in_region) {
      throw Error(ErrorCode::InvalidGeometry, "waypoint '" + w.id + "' is not inside any region");
    }
  }
  {
    std::set<std::pair<double, double>> positions;
    for (const auto& w : waypoints) {
      if (!positions.emplace(w.position.x, w.position.y).second) {
        throw Error(ErrorCode::InvalidGeometry, "waypoint '" + w.id + "' shares its position with another waypoint");
      }
    }
  }

  const std::size_t n = waypoints.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency(n);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<NavEdge> nav_edges;
  for (const auto& [a, b] : edges) {
    auto ia = scene.waypoint_index_.find(a);
    auto ib = scene.waypoint_index_.find(b);
    if (ia == scene.waypoint_index_.end() || ib == scene.waypoint_index_.end()) {
      throw Error(ErrorCode::MalformedBundle, "nav edge references unknown waypoint: " + a + " - " + b);
    }
    if (ia->second == ib->second) throw Error(ErrorCode::MalformedBundle, "nav edge is a self-loop: " + a);
    const auto key = std::minmax(ia->second, ib->second);
    if (!seen.insert({key.first, key.second}).second) continue;
    const double w = distance(waypoints[ia->second].position, waypoints[ib->second].position);
    adjacency[ia->second].emplace_back(ib->second, w);
    adjacency[ib->second].emplace_back(ia->second, w);
    nav_edges.push_back({a, b, w});
  }

  std::vector<bool> reached(n, false);
  std::vector<std::size_t> stack{0};
  reached[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (const auto& [v, w] : adjacency[u]) {
      if (!reached[v]) {
        reached[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  if (count != n) {
    throw Error(ErrorCode::DisconnectedGraph,
                "navigation graph reaches " + std::to_string(count) + " of " + std::to_string(n) + " waypoints");
  }

  if (task.start && !scene.waypoint_index_.count(*task.start)) {
    throw Error(ErrorCode::MalformedBundle, "task start references unknown waypoint '" + *task.start + "'");
  }
  for (const auto& c : task.candidates) {
    if (!scene.waypoint_index_.count(c)) {
      throw Error(ErrorCode::MalformedBundle, "task candidate references unknown waypoint '" + c + "'");
    }
  }

  std::vector<WaypointId> ids;
  ids.reserve(n);
  for (const auto& w : waypoints) ids.push_back(w.id);

  scene.map = map;
  scene.areas = std::move(areas);
  scene.waypoints = std::move(waypoints);
  scene.nav_edges = std::move(nav_edges);
  scene.task = std::move(task);
  scene.router_ = std::make_shared<const NavRouter>(std::move(ids), std::move(adjacency));
  scene.locator_ = std::make_shared<const WaypointLocator>(scene.waypoints);
  return scene;
}

namespace detail {

inline Point parse_point(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::MalformedBundle, "polygon vertex must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::MalformedBundle, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace detail

/// Parses and validates a scene bundle document. Any input yields either a
/// valid scene or a typed Error.
inline SceneBundle load_scene(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedBundle, e.what());
  }
  try {
    using detail::require;
    const auto& jm = require(doc, "map");
    GridMap map;
    const auto& jw = require(jm, "width");
    const auto& jh = require(jm, "height");
    if (!jw.is_number_integer() || !jh.is_number_integer()) {
      throw Error(ErrorCode::MalformedBundle, "map width/height must be integers");
    }
    const auto w = jw.get<std::int64_t>();
    const auto h = jh.get<std::int64_t>();
    if (w < 1 || h < 1 || w > kMaxMapSide || h > kMaxMapSide) {
      throw Error(ErrorCode::InvalidGeometry, "map dimensions out of range");
    }
    map.width = static_cast<int>(w);
    map.height = static_cast<int>(h);
    map.resolution = jm.value("resolution", 0.05);

    std::vector<Area> areas;
    for (const auto& ja : require(doc, "areas")) {
      Area a;
      a.id = require(ja, "id").get<std::string>();
      const auto kind = require(ja, "kind").get<std::string>();
      if (kind == "region") {
        a.kind = AreaKind::Region;
      } else if (kind == "surface") {
        a.kind = AreaKind::Surface;
      } else {
        throw Error(ErrorCode::MalformedBundle, "area kind must be region or surface, got '" + kind + "'");
      }
      const auto& poly = require(ja, "polygon");
      if (!poly.is_array()) throw Error(ErrorCode::MalformedBundle, "polygon must be an array");
      for (const auto& v : poly) a.polygon.push_back(detail::parse_point(v));
      areas.push_back(std::move(a));
    }

    std::vector<Waypoint> waypoints;
    for (const auto& jw2 : require(doc, "waypoints")) {
      Waypoint wp;
      wp.id = require(jw2, "id").get<std::string>();
      const auto& x = require(jw2, "x");
      const auto& y = require(jw2, "y");
      if (!x.is_number() || !y.is_number()) throw Error(ErrorCode::MalformedBundle, "waypoint x/y must be numbers");
      wp.position = {x.get<double>(), y.get<double>()};
      waypoints.push_back(std::move(wp));
    }

    std::vector<std::pair<WaypointId, WaypointId>> edges;
    for (const auto& je : require(doc, "nav_edges")) {
      if (!je.is_array() || je.size() != 2) throw Error(ErrorCode::MalformedBundle, "nav edge must be [idA, idB]");
      edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
    }

    TaskDefaults task;
    if (doc.contains("task")) {
      const auto& jt = doc.at("task");
      task.carried = jt.value("carried", task.carried);
      task.container = jt.value("container", task.container);
      if (jt.contains("start")) task.start = jt.at("start").get<std::string>();
      if (jt.contains("candidates")) task.candidates = jt.at("candidates").get<std::vector<std::string>>();
      if (task.carried.empty() || task.container.empty() || task.carried == task.container) {
        throw Error(ErrorCode::MalformedBundle, "task objects must be distinct and non-empty");
      }
    }
    return make_scene(map, std::move(areas), std::move(waypoints), std::move(edges), std::move(task));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedBundle, e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path, ErrorCode on_missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(on_missing, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SceneBundle load_scene_file(const std::filesystem::path& path) {
  return load_scene(read_file(path, ErrorCode::UnknownScene));
}

inline nlohmann::json scene_to_json(const SceneBundle& scene) {
  nlohmann::json doc;
  doc["map"] = {{"width", scene.map.width}, {"height", scene.map.height}, {"resolution", scene.map.resolution}};
  doc["areas"] = nlohmann::json::array();
  for (const auto& a : scene.areas) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& p : a.polygon) poly.push_back({p.x, p.y});
    doc["areas"].push_back(
        {{"id", a.id}, {"kind", a.kind == AreaKind::Region ? "region" : "surface"}, {"polygon", poly}});
  }
  doc["waypoints"] = nlohmann::json::array();
  for (const auto& w : scene.waypoints) {
    doc["waypoints"].push_back({{"id", w.id}, {"x", w.position.x}, {"y", w.position.y}});
  }
  doc["nav_edges"] = nlohmann::json::array();
  for (const auto& e : scene.nav_edges) doc["nav_edges"].push_back({e.a, e.b});
  nlohmann::json task = {{"carried", scene.task.carried}, {"container", scene.task.container}};
  if (scene.task.start) task["start"] = *scene.task.start;
  if (!scene.task.candidates.empty()) task["candidates"] = scene.task.candidates;
  doc["task"] = task;
  return doc;
}

// ---------------------------------------------------------------------------
// Pixel queries

/// Pixels whose centers lie inside the area polygon (even-odd, edges inclusive).
inline std::vector<Pixel> pixels_in_area(const SceneBundle& scene, std::string_view area_id) {
  const Area& area = scene.area(area_id);
  double min_x = area.polygon[0].x, max_x = min_x, min_y = area.polygon[0].y, max_y = min_y;
  for (const auto& p : area.polygon) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x1 = std::min(scene.map.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y1 = std::min(scene.map.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
  std::vector<Pixel> out;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (geometry::contains(area.polygon, pixel_center({x, y}))) out.push_back({x, y});
    }
  }
  return out;
}

/// Closest waypoint to a real-valued point; ties go to the smallest id.
inline const WaypointId& nearest_waypoint(const SceneBundle& scene, Point point) {
  if (!std::isfinite(point.x) || !std::isfinite(point.y) || !scene.map.contains(point)) {
    throw Error(ErrorCode::OutOfBounds, "point lies outside the map");
  }
  return scene.waypoints[scene.locator().nearest(point)].id;
}

/// Partition of every map pixel into the Voronoi cell of its nearest waypoint.
class VoronoiAssignment {
 public:
  VoronoiAssignment(std::shared_ptr<const SceneBundle> scene) : scene_(std::move(scene)) {
    const auto& map = scene_->map;
    owner_.resize(map.pixel_count());
    cells_.resize(scene_->waypoints.size());
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        const std::size_t lin = map.linear({x, y});
        const auto idx = static_cast<std::uint32_t>(scene_->locator().nearest(pixel_center({x, y})));
        owner_[lin] = idx;
        cells_[idx].push_back(static_cast<std::uint32_t>(lin));
      }
    }
  }

  const SceneBundle& scene() const { return *scene_; }
  const GridMap& map() const { return scene_->map; }

  std::size_t owner_index(Pixel p) const {
    if (!map().contains(p)) throw Error(ErrorCode::OutOfBounds, "pixel lies outside the map");
    return owner_[map().linear(p)];
  }
  const WaypointId& owner(Pixel p) const { return scene_->waypoints[owner_index(p)].id; }

  /// Pixel set X_w of a waypoint.
  std::vector<Pixel> cell(std::string_view waypoint_id) const {
    const auto& lin = cells_[scene_->waypoint_index(waypoint_id)];
    std::vector<Pixel> out;
    out.reserve(lin.size());
    for (auto l : lin) out.push_back(map().pixel_at(l));
    return out;
  }
  std::size_t cell_size(std::size_t waypoint_index) const { return cells_[waypoint_index].size(); }

  /// Nearest waypoint for a free-floating point, using its exact position.
  const WaypointId& nearest(Point p) const { return nearest_waypoint(*scene_, p); }

 private:
  std::shared_ptr<const SceneBundle> scene_;
  std::vector<std::uint32_t> owner_;
  std::vector<std::vector<std::uint32_t>> cells_;
};

inline VoronoiAssignment voronoi_assign(std::shared_ptr<const SceneBundle> scene) {
  return VoronoiAssignment(std::move(scene));
}

inline VoronoiAssignment voronoi_assign(const SceneBundle& scene) {
  return VoronoiAssignment(std::make_shared<const SceneBundle>(scene));
}

// ---------------------------------------------------------------------------
// Navigation

inline NavRouter::Path shortest_path(const SceneBundle& scene, std::string_view from, std::string_view to) {
  return scene.router().path(scene.waypoint_index(from), scene.waypoint_index(to));
}

/// Suggests nav edges between waypoints whose Voronoi cells touch and whose
/// connecting segment stays clear of every surface. Advisory output only.
inline std::vector<std::pair<WaypointId, WaypointId>> propose_nav_edges(const VoronoiAssignment& assignment) {
  const SceneBundle& scene = assignment.scene();
  const GridMap& map = scene.map;
  std::set<std::pair<std::size_t, std::size_t>> touching;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const std::size_t here = assignment.owner_index({x, y});
      if (x + 1 < map.width) {
        const std::size_t right = assignment.owner_index({x + 1, y});
        if (right != here) touching.insert(std::minmax(here, right));
      }
      if (y + 1 < map.height) {
        const std::size_t down = assignment.owner_index({x, y + 1});
        if (down != here) touching.insert(std::minmax(here, down));
      }
    }
  }
  std::vector<std::pair<WaypointId, WaypointId>> out;
  for (const auto& [i, j] : touching) {
    const Point a = scene.waypoints[i].position;
    const Point b = scene.waypoints[j].position;
    bool blocked = false;
    for (const auto& area : scene.areas) {
      if (area.kind != AreaKind::Surface) continue;
      const auto& poly = area.polygon;
      if (geometry::contains(poly, a) || geometry::contains(poly, b) ||
          geometry::contains(poly, {(a.x + b.x) / 2, (a.y + b.y) / 2})) {
        blocked = true;
      }
      for (std::size_t k = 0; k < poly.size() && !blocked; ++k) {
        blocked = geometry::segments_intersect(a, b, poly[k], poly[(k + 1) % poly.size()]);
      }
      if (blocked) break;
    }
    if (!blocked) {
      auto p = std::minmax(scene.waypoints[i].id, scene.waypoints[j].id);
      out.emplace_back(p.first, p.second);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ues
