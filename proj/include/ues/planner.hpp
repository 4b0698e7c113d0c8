#pragma once

// Determinize-and-replan execution of the pick-and-place task: the robot
// assumes each object sits at its most likely remaining waypoint, plans,
// executes until an observation contradicts that assumption, advances the
// belief and replans. Once insight runs out it searches unvisited waypoints
// nearest-first.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ues/error.hpp"
#include "ues/insight.hpp"
#include "ues/scene.hpp"

namespace ues {

struct TaskSpec {
  std::string carried_object = "umbrella";
  std::string container_object = "bag";
  WaypointId start_waypoint;
};

/// Task from the scene's defaults; throws when the bundle names no start.
inline TaskSpec default_task(const SceneBundle& scene) {
  if (!scene.task.start) throw Error(ErrorCode::InvalidArgument, "scene defines no start waypoint");
  return {scene.task.carried, scene.task.container, *scene.task.start};
}

inline void validate_task(const SceneBundle& scene, const TaskSpec& task) {
  if (task.carried_object.empty() || task.container_object.empty() || task.carried_object == task.container_object) {
    throw Error(ErrorCode::InvalidArgument, "task objects must be distinct and non-empty");
  }
  scene.waypoint_index(task.start_waypoint);
}

struct ObjectBelief {
  std::string object_id;
  std::vector<WaypointId> candidates;  // most likely first
  std::size_t cursor = 0;

  bool exhausted() const { return cursor >= candidates.size(); }
};

using BeliefSet = std::map<std::string, ObjectBelief>;

struct WorldState {
  std::map<std::string, WaypointId> object_locations;
};

enum class ActionKind { Move, Observe, Pick, Place, Fail };

constexpr std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Move: return "move";
    case ActionKind::Observe: return "observe";
    case ActionKind::Pick: return "pick";
    case ActionKind::Place: return "place";
    case ActionKind::Fail: return "fail";
  }
  return "fail";
}

/// Arguments by kind: Move [from, to], Observe [at], Pick [object, at],
/// Place [object, container, at], Fail [reason].
struct Action {
  ActionKind kind = ActionKind::Observe;
  std::vector<std::string> args;

  static Action move(WaypointId from, WaypointId to) { return {ActionKind::Move, {std::move(from), std::move(to)}}; }
  static Action observe(WaypointId at) { return {ActionKind::Observe, {std::move(at)}}; }
  static Action pick(std::string object, WaypointId at) { return {ActionKind::Pick, {std::move(object), std::move(at)}}; }
  static Action place(std::string object, std::string container, WaypointId at) {
    return {ActionKind::Place, {std::move(object), std::move(container), std::move(at)}};
  }
  static Action fail(std::string reason) { return {ActionKind::Fail, {std::move(reason)}}; }

  friend bool operator==(const Action&, const Action&) = default;
};

inline std::string to_string(const Action& a) {
  std::string s(to_string(a.kind));
  s += "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) s += (i ? ", " : "") + a.args[i];
  return s + ")";
}

struct PlanTrace {
  std::vector<Action> actions;
  std::vector<WaypointId> fallback_targets;  // waypoints chosen by nearest-neighbor search, in order

  bool succeeded() const { return !actions.empty() && actions.back().kind == ActionKind::Place; }
};

/// Moves plus Pick/Place; Observe is free.
inline std::size_t trace_length(const PlanTrace& trace) {
  return static_cast<std::size_t>(std::count_if(trace.actions.begin(), trace.actions.end(), [](const Action& a) {
    return a.kind == ActionKind::Move || a.kind == ActionKind::Pick || a.kind == ActionKind::Place;
  }));
}

inline ObjectBelief belief_from_insight(const CompiledInsight& insight) {
  return std::visit(
      [](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, CategoricalBelief>) {
          auto ranking = belief_to_ranking(in);
          return ObjectBelief{in.object_id, std::move(ranking.ranked), 0};
        } else {
          if (in.ranked.empty()) throw Error(ErrorCode::EmptyInsight, "ranking for '" + in.object_id + "' is empty");
          return ObjectBelief{in.object_id, in.ranked, 0};
        }
      },
      insight);
}

inline std::map<std::string, WaypointId> determinize(const BeliefSet& beliefs) {
  std::map<std::string, WaypointId> out;
  for (const auto& [object, belief] : beliefs) {
    if (belief.exhausted()) throw Error(ErrorCode::InsightExhausted, "insight for '" + object + "' is exhausted");
    out[object] = belief.candidates[belief.cursor];
  }
  return out;
}

namespace detail {

inline void append_leg(std::vector<Action>& plan, const SceneBundle& scene, const WaypointId& from,
                       const WaypointId& to) {
  const auto path = shortest_path(scene, from, to);
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    plan.push_back(Action::move(path.nodes[i], path.nodes[i + 1]));
    plan.push_back(Action::observe(path.nodes[i + 1]));
  }
}

inline const WaypointId& assumed_location(const std::map<std::string, WaypointId>& assumed, const std::string& object) {
  auto it = assumed.find(object);
  if (it == assumed.end()) throw Error(ErrorCode::UnknownObject, "no assumed location for '" + object + "'");
  return it->second;
}

}  // namespace detail

/// Plan on the determinized domain: observe here, walk to the carried
/// object's assumed waypoint and pick it, then walk to the container's
/// assumed waypoint and place it. Every Move crosses one nav edge and is
/// followed by an Observe at the entered waypoint.
inline std::vector<Action> make_plan(const SceneBundle& scene, const TaskSpec& task,
                                     const std::map<std::string, WaypointId>& assumed, const WaypointId& robot_at,
                                     const std::optional<std::string>& holding) {
  scene.waypoint_index(robot_at);
  const WaypointId& container_at = detail::assumed_location(assumed, task.container_object);
  scene.waypoint_index(container_at);
  std::vector<Action> plan{Action::observe(robot_at)};
  WaypointId at = robot_at;
  if (holding != task.carried_object) {
    const WaypointId& carried_at = detail::assumed_location(assumed, task.carried_object);
    scene.waypoint_index(carried_at);
    detail::append_leg(plan, scene, at, carried_at);
    plan.push_back(Action::pick(task.carried_object, carried_at));
    at = carried_at;
  }
  detail::append_leg(plan, scene, at, container_at);
  plan.push_back(Action::place(task.carried_object, task.container_object, container_at));
  return plan;
}

/// Index of the closest waypoint (by path weight) outside `visited`; equal
/// distances resolve to the smallest id.
inline std::optional<std::size_t> nearest_unvisited(const NavRouter& router, std::size_t from,
                                                    const std::vector<bool>& visited) {
  std::optional<double> best;
  for (std::size_t i = 0; i < router.size(); ++i) {
    if (!visited[i] && (!best || router.distance(from, i) < *best)) best = router.distance(from, i);
  }
  if (!best) return std::nullopt;
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < router.size(); ++i) {
    if (visited[i] || !weights_equal(router.distance(from, i), *best)) continue;
    if (!pick || router.ids()[i] < router.ids()[*pick]) pick = i;
  }
  return pick;
}

namespace detail {

class ReplanExecutor {
 public:
  ReplanExecutor(const SceneBundle& scene, const TaskSpec& task, BeliefSet beliefs, const WorldState& world)
      : scene_(scene), task_(task), beliefs_(std::move(beliefs)), visited_(scene.waypoints.size(), false) {
    validate_task(scene, task);
    for (const auto* object : {&task.carried_object, &task.container_object}) {
      auto it = world.object_locations.find(*object);
      if (it == world.object_locations.end()) {
        throw Error(ErrorCode::UnknownObject, "world has no location for '" + *object + "'");
      }
      truth_[*object] = scene.waypoint_index(it->second);
      auto& b = beliefs_[*object];
      b.object_id = *object;
      for (const auto& c : b.candidates) scene.waypoint_index(c);
      b.cursor = std::min(b.cursor, b.candidates.size());
    }
    at_ = scene.waypoint_index(task.start_waypoint);
  }

  PlanTrace run() {
    observe();
    bool first_plan = true;
    // Every replan is caused by a belief change, a pick, or reaching a
    // fallback target; each of those is bounded by the scene size.
    const std::size_t max_replans = 4 * (scene_.waypoints.size() + 2) +
                                    beliefs_[task_.carried_object].candidates.size() +
                                    beliefs_[task_.container_object].candidates.size();
    for (std::size_t round = 0; round <= max_replans; ++round) {
      const auto plan = make_plan(scene_, task_, assumptions(), id(at_), holding());
      for (std::size_t i = first_plan ? 0 : 1; i < plan.size(); ++i) {
        const Action& action = plan[i];
        trace_.actions.push_back(action);
        if (action.kind == ActionKind::Move) {
          at_ = scene_.waypoint_index(action.args[1]);
        } else if (action.kind == ActionKind::Observe) {
          if (observe()) break;
        } else if (action.kind == ActionKind::Pick) {
          holding_ = true;
          break;
        } else if (action.kind == ActionKind::Place) {
          return std::move(trace_);
        }
      }
      first_plan = false;
    }
    trace_.actions.push_back(Action::fail("replanning did not converge"));
    return std::move(trace_);
  }

 private:
  const WaypointId& id(std::size_t i) const { return scene_.waypoints[i].id; }

  std::optional<std::string> holding() const {
    if (holding_) return task_.carried_object;
    return std::nullopt;
  }

  const std::string& active_object() const { return holding_ ? task_.container_object : task_.carried_object; }

  /// Perceives the current waypoint. Returns true when any belief changed.
  bool observe() {
    bool changed = false;
    visited_[at_] = true;
    for (const auto* object : {&task_.carried_object, &task_.container_object}) {
      if (holding_ && *object == task_.carried_object) continue;
      auto& belief = beliefs_[*object];
      if (truth_[*object] == at_) {
        if (!sighted_.count(*object)) {
          sighted_[*object] = at_;
          const bool same = !belief.exhausted() && belief.candidates[belief.cursor] == id(at_) &&
                            !fallback_.count(*object);
          belief.candidates = {id(at_)};
          belief.cursor = 0;
          fallback_.erase(*object);
          changed = changed || !same;
        }
        continue;
      }
      if (sighted_.count(*object)) continue;
      while (!belief.exhausted() && visited_[scene_.waypoint_index(belief.candidates[belief.cursor])]) {
        ++belief.cursor;
        changed = true;
      }
      auto fb = fallback_.find(*object);
      if (fb != fallback_.end() && visited_[fb->second]) {
        fallback_.erase(fb);
        changed = true;
      }
    }
    return changed;
  }

  std::map<std::string, WaypointId> assumptions() {
    std::map<std::string, WaypointId> out;
    const std::string& active = active_object();
    const auto active_at = locate(active, at_, true);
    out[active] = id(active_at);
    if (!holding_) out[task_.container_object] = id(locate(task_.container_object, active_at, false));
    return out;
  }

  std::size_t locate(const std::string& object, std::size_t origin, bool commit) {
    if (auto s = sighted_.find(object); s != sighted_.end()) return s->second;
    const auto& belief = beliefs_[object];
    if (!belief.exhausted()) return scene_.waypoint_index(belief.candidates[belief.cursor]);
    if (auto fb = fallback_.find(object); fb != fallback_.end()) return fb->second;
    const auto next = nearest_unvisited(scene_.router(), origin, visited_);
    // Only reachable when the world contradicts the scene; any waypoint keeps planning total.
    if (!next) return origin;
    if (commit) {
      fallback_[object] = *next;
      trace_.fallback_targets.push_back(id(*next));
    }
    return *next;
  }

  const SceneBundle& scene_;
  const TaskSpec& task_;
  BeliefSet beliefs_;
  std::map<std::string, std::size_t> truth_;
  std::map<std::string, std::size_t> sighted_;
  std::map<std::string, std::size_t> fallback_;
  std::vector<bool> visited_;
  std::size_t at_ = 0;
  bool holding_ = false;
  PlanTrace trace_;
};

}  // namespace detail

/// Simulates plan execution against a ground-truth world. The robot observes
/// every waypoint it enters; an object missing from its assumed waypoint
/// advances that object's belief, a sighting replaces it with certainty, and
/// exhausted insight falls back to nearest-unvisited search.
inline PlanTrace execute_with_replan(const SceneBundle& scene, const TaskSpec& task, BeliefSet beliefs,
                                     const WorldState& world) {
  return detail::ReplanExecutor(scene, task, std::move(beliefs), world).run();
}

// ---------------------------------------------------------------------------
// Trace export: JSON lines, one action per line.

inline std::string trace_to_jsonl(const PlanTrace& trace) {
  std::string out;
  for (std::size_t t = 0; t < trace.actions.size(); ++t) {
    const auto& a = trace.actions[t];
    nlohmann::json j = {{"t", t}, {"action", std::string(to_string(a.kind))}, {"args", a.args}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline PlanTrace parse_trace_jsonl(std::string_view text) {
  static const std::map<std::string, std::pair<ActionKind, std::size_t>> kinds = {
      {"move", {ActionKind::Move, 2}},   {"observe", {ActionKind::Observe, 1}}, {"pick", {ActionKind::Pick, 2}},
      {"place", {ActionKind::Place, 3}}, {"fail", {ActionKind::Fail, 1}}};
  PlanTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t expected_t = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto kind = kinds.find(j.at("action").get<std::string>());
      if (kind == kinds.end()) throw Error(ErrorCode::MalformedTrace, "unknown action in line " + std::to_string(expected_t));
      if (j.at("t").get<std::size_t>() != expected_t) {
        throw Error(ErrorCode::MalformedTrace, "trace indices must be consecutive from 0");
      }
      auto args = j.at("args").get<std::vector<std::string>>();
      if (args.size() != kind->second.second) throw Error(ErrorCode::MalformedTrace, "wrong argument count");
      trace.actions.push_back({kind->second.first, std::move(args)});
      ++expected_t;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedTrace, e.what());
    }
  }
  return trace;
}

/// Checks that a trace is physically consistent with a scene: moves follow
/// nav edges from the robot's position and pick/place happen where the robot is.
inline void validate_trace(const SceneBundle& scene, const PlanTrace& trace) {
  std::optional<WaypointId> at;
  for (const auto& a : trace.actions) {
    switch (a.kind) {
      case ActionKind::Move: {
        const auto from = scene.waypoint_index(a.args[0]);
        const auto to = scene.waypoint_index(a.args[1]);
        if (at && *at != a.args[0]) throw Error(ErrorCode::MalformedTrace, "move starts away from the robot: " + to_string(a));
        if (!std::isfinite(scene.router().edge_weight(from, to))) {
          throw Error(ErrorCode::MalformedTrace, "move does not follow a nav edge: " + to_string(a));
        }
        at = a.args[1];
        break;
      }
      case ActionKind::Observe:
      case ActionKind::Pick:
      case ActionKind::Place:
        scene.waypoint_index(a.args.back());
        if (at && *at != a.args.back()) throw Error(ErrorCode::MalformedTrace, "action away from the robot: " + to_string(a));
        at = a.args.back();
        break;
      case ActionKind::Fail:
        break;
    }
  }
}

}  // namespace ues
