#pragma once

// Compiles raw human input from the precision, paint and rank interfaces into
// categorical beliefs or rankings over waypoints.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ues/error.hpp"
#include "ues/geometry.hpp"
#include "ues/scene.hpp"

namespace ues {

enum class InterfaceKind { Precision, Paint, Rank };

constexpr std::string_view to_string(InterfaceKind kind) {
  switch (kind) {
    case InterfaceKind::Precision: return "precision";
    case InterfaceKind::Paint: return "paint";
    case InterfaceKind::Rank: return "rank";
  }
  return "precision";
}

inline InterfaceKind parse_interface(std::string_view s) {
  if (s == "precision") return InterfaceKind::Precision;
  if (s == "paint") return InterfaceKind::Paint;
  if (s == "rank") return InterfaceKind::Rank;
  throw Error(ErrorCode::InvalidArgument, "unknown interface '" + std::string(s) + "'");
}

struct SelectedPoint {
  Point position;
  double slider = 0.0;
};

/// Free-floating points with likelihood sliders. Points are kept exactly as entered.
struct PrecisionInput {
  std::string object_id;
  std::vector<SelectedPoint> points;
};

/// Sparse brightness field; absent pixels have brightness 0.
struct PaintField {
  std::string object_id;
  std::map<Pixel, double> brightness;

  double at(Pixel p) const {
    auto it = brightness.find(p);
    return it == brightness.end() ? 0.0 : it->second;
  }
};

/// Ordered positions, index 0 is the most likely location.
struct RankInput {
  std::string object_id;
  std::vector<Point> points;
};

using InsightPayload = std::variant<PrecisionInput, PaintField, RankInput>;

struct CategoricalBelief {
  std::string object_id;
  std::map<WaypointId, double> probabilities;  // zero-mass waypoints omitted

  double total() const {
    double s = 0.0;
    for (const auto& [id, p] : probabilities) s += p;
    return s;
  }
};

struct WaypointRanking {
  std::string object_id;
  std::vector<WaypointId> ranked;
};

using CompiledInsight = std::variant<CategoricalBelief, WaypointRanking>;

struct BrushConfig {
  double radius = 12.0;  // pixels
  double delta = 0.08;   // brightness per tick at the brush center
};

inline InterfaceKind interface_of(const InsightPayload& payload) {
  return static_cast<InterfaceKind>(payload.index());
}

inline const std::string& object_of(const InsightPayload& payload) {
  return std::visit([](const auto& p) -> const std::string& { return p.object_id; }, payload);
}

// ---------------------------------------------------------------------------
// Precision

/// Sliders pass through when their sum is at most 1, otherwise each is
/// divided by the sum. Partial distributions are therefore preserved.
inline std::vector<double> normalize_sliders(std::span<const double> sliders) {
  const double sum = std::accumulate(sliders.begin(), sliders.end(), 0.0);
  std::vector<double> out(sliders.begin(), sliders.end());
  if (sum > 1.0) {
    for (double& s : out) s /= sum;
  }
  return out;
}

inline CategoricalBelief precision_to_belief(const PrecisionInput& input, const VoronoiAssignment& assignment) {
  std::vector<double> sliders;
  sliders.reserve(input.points.size());
  for (const auto& p : input.points) {
    if (!(p.slider >= 0.0 && p.slider <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "slider values must lie in [0, 1]");
    }
    sliders.push_back(p.slider);
  }
  const auto mass = normalize_sliders(sliders);
  CategoricalBelief belief{input.object_id, {}};
  for (std::size_t i = 0; i < input.points.size(); ++i) {
    const WaypointId& w = assignment.nearest(input.points[i].position);
    if (mass[i] > 0.0) belief.probabilities[w] += mass[i];
  }
  return belief;
}

// ---------------------------------------------------------------------------
// Paint

inline CategoricalBelief paint_to_belief(const PaintField& field, const VoronoiAssignment& assignment) {
  const SceneBundle& scene = assignment.scene();
  std::vector<double> per_waypoint(scene.waypoints.size(), 0.0);
  double total = 0.0;
  for (const auto& [pixel, b] : field.brightness) {
    if (!scene.map.contains(pixel)) throw Error(ErrorCode::OutOfBounds, "painted pixel lies outside the map");
    if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::InvalidArgument, "brightness must lie in [0, 1]");
    per_waypoint[assignment.owner_index(pixel)] += b;
    total += b;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyInsight, "paint field for '" + field.object_id + "' is empty");
  CategoricalBelief belief{field.object_id, {}};
  for (std::size_t i = 0; i < per_waypoint.size(); ++i) {
    if (per_waypoint[i] > 0.0) belief.probabilities[scene.waypoints[i].id] = per_waypoint[i] / total;
  }
  return belief;
}

/// One brush application: pixels within the radius gain ticks * delta scaled
/// by a linear falloff (1 at the center, 0 at the radius), clamped to 1.
inline PaintField apply_brush(PaintField field, const GridMap& map, Point center, int ticks,
                              const BrushConfig& brush = {}) {
  if (!std::isfinite(center.x) || !std::isfinite(center.y) || !map.contains(center)) {
    throw Error(ErrorCode::OutOfBounds, "brush center lies outside the map");
  }
  if (ticks < 1) throw Error(ErrorCode::InvalidArgument, "brush ticks must be positive");
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - brush.radius)));
  const int x1 = std::min(map.width - 1, static_cast<int>(std::ceil(center.x + brush.radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - brush.radius)));
  const int y1 = std::min(map.height - 1, static_cast<int>(std::ceil(center.y + brush.radius)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = distance(pixel_center({x, y}), center);
      if (d >= brush.radius) continue;
      const double gain = ticks * brush.delta * (1.0 - d / brush.radius);
      if (gain <= 0.0) continue;
      double& b = field.brightness[{x, y}];
      b = std::min(1.0, b + gain);
    }
  }
  return field;
}

// ---------------------------------------------------------------------------
// Rankings

inline WaypointRanking rank_to_ranking(const RankInput& input, const VoronoiAssignment& assignment) {
  WaypointRanking out{input.object_id, {}};
  std::set<WaypointId> seen;
  for (const auto& p : input.points) {
    const WaypointId& w = assignment.nearest(p);
    if (seen.insert(w).second) out.ranked.push_back(w);
  }
  return out;
}

/// Positive-mass waypoints by descending probability, ties by id.
inline WaypointRanking belief_to_ranking(const CategoricalBelief& belief) {
  std::vector<std::pair<WaypointId, double>> entries;
  for (const auto& [id, p] : belief.probabilities) {
    if (p > 0.0) entries.emplace_back(id, p);
  }
  if (entries.empty()) throw Error(ErrorCode::EmptyInsight, "belief for '" + belief.object_id + "' has empty support");
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& l, const auto& r) { return l.second > r.second; });
  WaypointRanking out{belief.object_id, {}};
  for (auto& [id, p] : entries) out.ranked.push_back(std::move(id));
  return out;
}

inline CompiledInsight compile_insight(const InsightPayload& payload, const VoronoiAssignment& assignment) {
  switch (interface_of(payload)) {
    case InterfaceKind::Precision:
      return precision_to_belief(std::get<PrecisionInput>(payload), assignment);
    case InterfaceKind::Paint:
      return paint_to_belief(std::get<PaintField>(payload), assignment);
    case InterfaceKind::Rank:
      return rank_to_ranking(std::get<RankInput>(payload), assignment);
  }
  throw Error(ErrorCode::MalformedPayload, "unknown interface");
}

// ---------------------------------------------------------------------------
// Payload JSON

namespace detail {

inline double payload_number(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorCode::MalformedPayload, std::string("expected numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace detail

/// Parses the wire form `{"object_id", "interface", "points" | "paint"}`.
inline InsightPayload parse_insight_payload(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedPayload, "payload must be an object");
  if (!j.contains("object_id") || !j.at("object_id").is_string() || !j.contains("interface") ||
      !j.at("interface").is_string()) {
    throw Error(ErrorCode::MalformedPayload, "payload needs string fields object_id and interface");
  }
  const std::string object_id = j.at("object_id").get<std::string>();
  InterfaceKind kind;
  try {
    kind = parse_interface(j.at("interface").get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedPayload, e.detail());
  }
  const bool has_points = j.contains("points");
  const bool has_paint = j.contains("paint");
  if (has_points == has_paint) {
    throw Error(ErrorCode::MalformedPayload, "exactly one of points/paint must be present");
  }
  if ((kind == InterfaceKind::Paint) != has_paint) {
    throw Error(ErrorCode::MalformedPayload, "payload body does not match interface tag");
  }
  const auto& body = has_points ? j.at("points") : j.at("paint");
  if (!body.is_array()) throw Error(ErrorCode::MalformedPayload, "points/paint must be an array");

  switch (kind) {
    case InterfaceKind::Precision: {
      PrecisionInput in{object_id, {}};
      for (const auto& p : body) {
        const double slider = detail::payload_number(p, "slider");
        if (!(slider >= 0.0 && slider <= 1.0)) throw Error(ErrorCode::MalformedPayload, "slider outside [0, 1]");
        in.points.push_back({{detail::payload_number(p, "x"), detail::payload_number(p, "y")}, slider});
      }
      return in;
    }
    case InterfaceKind::Rank: {
      RankInput in{object_id, {}};
      for (const auto& p : body) in.points.push_back({detail::payload_number(p, "x"), detail::payload_number(p, "y")});
      return in;
    }
    case InterfaceKind::Paint: {
      PaintField in{object_id, {}};
      for (const auto& p : body) {
        if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p.at("x").is_number_integer() ||
            !p.at("y").is_number_integer()) {
          throw Error(ErrorCode::MalformedPayload, "paint pixels need integer x and y");
        }
        const double b = detail::payload_number(p, "b");
        if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::MalformedPayload, "brightness outside [0, 1]");
        const auto x = p.at("x").get<std::int64_t>();
        const auto y = p.at("y").get<std::int64_t>();
        if (x < 0 || y < 0 || x > kMaxMapSide || y > kMaxMapSide) {
          throw Error(ErrorCode::OutOfBounds, "painted pixel lies outside the map");
        }
        const Pixel px{static_cast<int>(x), static_cast<int>(y)};
        if (in.brightness.count(px)) throw Error(ErrorCode::MalformedPayload, "duplicate paint pixel");
        if (b > 0.0) in.brightness[px] = b;
      }
      return in;
    }
  }
  throw Error(ErrorCode::MalformedPayload, "unknown interface");
}

inline nlohmann::json insight_payload_to_json(const InsightPayload& payload) {
  nlohmann::json j;
  j["object_id"] = object_of(payload);
  j["interface"] = std::string(to_string(interface_of(payload)));
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        nlohmann::json body = nlohmann::json::array();
        if constexpr (std::is_same_v<T, PrecisionInput>) {
          for (const auto& p : in.points) body.push_back({{"x", p.position.x}, {"y", p.position.y}, {"slider", p.slider}});
          j["points"] = body;
        } else if constexpr (std::is_same_v<T, RankInput>) {
          for (const auto& p : in.points) body.push_back({{"x", p.x}, {"y", p.y}});
          j["points"] = body;
        } else {
          for (const auto& [px, b] : in.brightness) {
            if (b > 0.0) body.push_back({{"x", px.x}, {"y", px.y}, {"b", b}});
          }
          j["paint"] = body;
        }
      },
      payload);
  return j;
}

/// Bounds check of every point or pixel against a map.
inline void validate_payload(const InsightPayload& payload, const GridMap& map) {
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, PrecisionInput>) {
          for (const auto& p : in.points) {
            if (!map.contains(p.position)) throw Error(ErrorCode::OutOfBounds, "point lies outside the map");
          }
        } else if constexpr (std::is_same_v<T, RankInput>) {
          for (const auto& p : in.points) {
            if (!map.contains(p)) throw Error(ErrorCode::OutOfBounds, "point lies outside the map");
          }
        } else {
          for (const auto& [px, b] : in.brightness) {
            if (!map.contains(px)) throw Error(ErrorCode::OutOfBounds, "painted pixel lies outside the map");
          }
        }
      },
      payload);
}

}  // namespace ues
