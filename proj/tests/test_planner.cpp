#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support/oracles.hpp"
#include "ues/planner.hpp"

using namespace ues;
using ues::testing::random_scene;
using ues::testing::reference_simulate;
using ues::testing::shortest_hops;
using ues::testing::simple_scene;

namespace {

const TaskSpec kTask{"umbrella", "bag", "A"};

SceneBundle line_graph() {
  return simple_scene(40, 10, {{"A", {0, 5}}, {"B", {10, 5}}, {"C", {20, 5}}, {"D", {30, 5}}},
                      {{"A", "B"}, {"B", "C"}, {"C", "D"}});
}

// S in the middle, four spokes.
SceneBundle star_graph() {
  return simple_scene(30, 30, {{"S", {15, 15}}, {"A", {25, 15}}, {"B", {15, 25}}, {"C", {5, 15}}, {"D", {15, 5}}},
                      {{"S", "A"}, {"S", "B"}, {"S", "C"}, {"S", "D"}}, "S");
}

BeliefSet beliefs(std::vector<WaypointId> umbrella, std::vector<WaypointId> bag) {
  return {{"umbrella", {"umbrella", std::move(umbrella), 0}}, {"bag", {"bag", std::move(bag), 0}}};
}

WorldState world(WaypointId umbrella, WaypointId bag) { return {{{"umbrella", umbrella}, {"bag", bag}}}; }

std::vector<WaypointId> random_candidates(std::mt19937_64& gen, const SceneBundle& scene, std::size_t max_len) {
  std::vector<WaypointId> ids;
  for (const auto& w : scene.waypoints) ids.push_back(w.id);
  std::shuffle(ids.begin(), ids.end(), gen);
  std::uniform_int_distribution<std::size_t> len(0, std::min(max_len, ids.size()));
  ids.resize(len(gen));
  return ids;
}

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(BeliefFromInsight, Examples) {
  EXPECT_EQ(belief_from_insight(CategoricalBelief{"bag", {{"w1", 0.2}, {"w2", 0.7}}}).candidates,
            (std::vector<WaypointId>{"w2", "w1"}));
  EXPECT_EQ(belief_from_insight(WaypointRanking{"bag", {"w5", "w3"}}).candidates,
            (std::vector<WaypointId>{"w5", "w3"}));
  const auto tie = belief_from_insight(CategoricalBelief{"bag", {{"w2", 0.5}, {"w1", 0.5}}});
  EXPECT_EQ(tie.candidates, (std::vector<WaypointId>{"w1", "w2"}));
  EXPECT_EQ(tie.cursor, 0u);
  EXPECT_EQ(error_of([] { belief_from_insight(WaypointRanking{"bag", {}}); }), ErrorCode::EmptyInsight);
  EXPECT_EQ(error_of([] { belief_from_insight(CategoricalBelief{"bag", {}}); }), ErrorCode::EmptyInsight);
}

TEST(Determinize, Examples) {
  auto b = beliefs({"w2", "w1"}, {"w7"});
  EXPECT_EQ(determinize(b), (std::map<std::string, WaypointId>{{"umbrella", "w2"}, {"bag", "w7"}}));
  b["umbrella"].cursor = 1;
  EXPECT_EQ(determinize(b).at("umbrella"), "w1");
  b["umbrella"].cursor = 2;
  EXPECT_EQ(error_of([&] { determinize(b); }), ErrorCode::InsightExhausted);
}

TEST(MakePlan, LineGraph) {
  const auto scene = line_graph();
  const auto plan = make_plan(scene, kTask, {{"umbrella", "C"}, {"bag", "D"}}, "A", std::nullopt);
  const std::vector<Action> expected{
      Action::observe("A"),       Action::move("A", "B"), Action::observe("B"), Action::move("B", "C"),
      Action::observe("C"),       Action::pick("umbrella", "C"), Action::move("C", "D"), Action::observe("D"),
      Action::place("umbrella", "bag", "D")};
  EXPECT_EQ(plan, expected);
  EXPECT_EQ(trace_length(PlanTrace{plan, {}}), 5u);
}

TEST(MakePlan, DegenerateLegs) {
  const auto scene = line_graph();
  const auto here = make_plan(scene, kTask, {{"umbrella", "A"}, {"bag", "C"}}, "A", std::nullopt);
  ASSERT_GE(here.size(), 2u);
  EXPECT_EQ(here[0], Action::observe("A"));
  EXPECT_EQ(here[1], Action::pick("umbrella", "A"));

  const auto same = make_plan(scene, kTask, {{"umbrella", "C"}, {"bag", "C"}}, "A", std::nullopt);
  ASSERT_GE(same.size(), 2u);
  EXPECT_EQ(same[same.size() - 2], Action::pick("umbrella", "C"));
  EXPECT_EQ(same.back(), Action::place("umbrella", "bag", "C"));

  const auto holding = make_plan(scene, kTask, {{"bag", "B"}}, "D", std::string("umbrella"));
  const std::vector<Action> expected{Action::observe("D"), Action::move("D", "C"), Action::observe("C"),
                                     Action::move("C", "B"), Action::observe("B"),
                                     Action::place("umbrella", "bag", "B")};
  EXPECT_EQ(holding, expected);

  EXPECT_EQ(error_of([&] { make_plan(scene, kTask, {{"umbrella", "Q"}, {"bag", "C"}}, "A", std::nullopt); }),
            ErrorCode::UnknownWaypoint);
}

TEST(TraceLength, Examples) {
  EXPECT_EQ(trace_length(PlanTrace{}), 0u);
  EXPECT_EQ(trace_length(PlanTrace{{Action::observe("A"), Action::observe("B")}, {}}), 0u);
}

TEST(ExecuteWithReplan, CorrectBeliefsFollowThePlan) {
  const auto scene = line_graph();
  const auto trace = execute_with_replan(scene, kTask, beliefs({"C"}, {"D"}), world("C", "D"));
  EXPECT_EQ(trace.actions, make_plan(scene, kTask, {{"umbrella", "C"}, {"bag", "D"}}, "A", std::nullopt));
  EXPECT_TRUE(trace.fallback_targets.empty());
}

TEST(ExecuteWithReplan, WrongFirstCandidateCostsTheDetour) {
  const auto scene = star_graph();
  const TaskSpec task{"umbrella", "bag", "S"};
  const auto trace = execute_with_replan(scene, task, beliefs({"A", "B"}, {"D"}), world("B", "D"));
  const std::vector<Action> expected{
      Action::observe("S"), Action::move("S", "A"), Action::observe("A"), Action::move("A", "S"),
      Action::observe("S"), Action::move("S", "B"), Action::observe("B"), Action::pick("umbrella", "B"),
      Action::move("B", "S"), Action::observe("S"), Action::move("S", "D"), Action::observe("D"),
      Action::place("umbrella", "bag", "D")};
  EXPECT_EQ(trace.actions, expected);
  const auto oracle = execute_with_replan(scene, task, beliefs({"B"}, {"D"}), world("B", "D"));
  EXPECT_EQ(trace_length(oracle), 5u);
  EXPECT_EQ(trace_length(trace), trace_length(oracle) + 2);
}

TEST(ExecuteWithReplan, ExhaustedInsightSearchesNearestUnvisited) {
  // Line A-B-C-D-E with spacing growing to the right; umbrella believed at B, actually at E.
  const auto scene = simple_scene(50, 10, {{"A", {0, 5}}, {"B", {5, 5}}, {"C", {12, 5}}, {"D", {22, 5}}, {"E", {40, 5}}},
                                  {{"A", "B"}, {"B", "C"}, {"C", "D"}, {"D", "E"}});
  const auto trace = execute_with_replan(scene, kTask, beliefs({"B"}, {"A"}), world("E", "A"));
  EXPECT_EQ(trace.fallback_targets, (std::vector<WaypointId>{"C", "D", "E"}));
  EXPECT_EQ(trace.actions, reference_simulate(scene, kTask, beliefs({"B"}, {"A"}), world("E", "A")).actions);
  EXPECT_TRUE(trace.succeeded());
  EXPECT_EQ(trace_length(trace), 4u + 1u + 4u + 1u);
}

TEST(ExecuteWithReplan, OpportunisticSightingOverridesBelief) {
  // Bag actually at B, believed at D; the robot passes B on its way to C and notices it.
  const auto scene = line_graph();
  const auto trace = execute_with_replan(scene, kTask, beliefs({"C"}, {"D"}), world("C", "B"));
  EXPECT_EQ(trace.actions.back(), Action::place("umbrella", "bag", "B"));
  EXPECT_EQ(trace_length(trace), 2u + 1u + 1u + 1u);
}

TEST(ExecuteWithReplan, MatchesReferenceSimulatorOnRandomSmallScenes) {
  std::mt19937_64 gen(404);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto scene = random_scene(gen, {.width = 20, .height = 20, .min_waypoints = 2, .max_waypoints = 6,
                                          .extra_edge_probability = 0.4, .integer_positions = trial % 2 == 0});
    const TaskSpec task = default_task(scene);
    std::uniform_int_distribution<std::size_t> pick(0, scene.waypoints.size() - 1);
    const auto b = beliefs(random_candidates(gen, scene, 3), random_candidates(gen, scene, 3));
    const auto w = world(scene.waypoints[pick(gen)].id, scene.waypoints[pick(gen)].id);
    const auto got = execute_with_replan(scene, task, b, w);
    const auto want = reference_simulate(scene, task, b, w);
    ASSERT_EQ(got.actions, want.actions) << "trial " << trial;
    ASSERT_EQ(got.fallback_targets, want.fallback_targets) << "trial " << trial;
  }
}

TEST(ExecuteWithReplan, SoundOnLargerScenes) {
  std::mt19937_64 gen(505);
  for (int trial = 0; trial < 300; ++trial) {
    const auto scene = random_scene(gen, {.width = 80, .height = 80, .min_waypoints = 5, .max_waypoints = 25,
                                          .extra_edge_probability = 0.1});
    const TaskSpec task = default_task(scene);
    std::uniform_int_distribution<std::size_t> pick(0, scene.waypoints.size() - 1);
    const auto b = beliefs(random_candidates(gen, scene, 6), random_candidates(gen, scene, 6));
    const auto w = world(scene.waypoints[pick(gen)].id, scene.waypoints[pick(gen)].id);
    const auto trace = execute_with_replan(scene, task, b, w);
    ASSERT_TRUE(trace.succeeded());
    EXPECT_EQ(trace.actions.back(), Action::place("umbrella", "bag", w.object_locations.at("bag")));
    const auto picks = std::count_if(trace.actions.begin(), trace.actions.end(),
                                     [](const Action& a) { return a.kind == ActionKind::Pick; });
    EXPECT_EQ(picks, 1);
    for (const auto& a : trace.actions) {
      if (a.kind == ActionKind::Pick) {
        EXPECT_EQ(a.args[1], w.object_locations.at("umbrella"));
      }
    }
    EXPECT_NO_THROW(validate_trace(scene, trace));
    const std::set<WaypointId> unique(trace.fallback_targets.begin(), trace.fallback_targets.end());
    EXPECT_EQ(unique.size(), trace.fallback_targets.size());
    EXPECT_EQ(trace.actions, execute_with_replan(scene, task, b, w).actions);
  }
}

TEST(ExecuteWithReplan, PerfectInsightIsOptimal) {
  std::mt19937_64 gen(606);
  for (int trial = 0; trial < 100; ++trial) {
    const auto scene = random_scene(gen, {.width = 60, .height = 60, .min_waypoints = 3, .max_waypoints = 20,
                                          .extra_edge_probability = 0.15, .integer_positions = false});
    const TaskSpec task = default_task(scene);
    std::uniform_int_distribution<std::size_t> pick(0, scene.waypoints.size() - 1);
    const auto u = scene.waypoints[pick(gen)].id, g = scene.waypoints[pick(gen)].id;
    const auto trace = execute_with_replan(scene, task, beliefs({u}, {g}), world(u, g));
    EXPECT_EQ(trace_length(trace), shortest_hops(scene, task.start_waypoint, u) + 1 + shortest_hops(scene, u, g) + 1);
  }
}

TEST(ExecuteWithReplan, RejectsInconsistentInputs) {
  const auto scene = line_graph();
  EXPECT_EQ(error_of([&] { execute_with_replan(scene, kTask, beliefs({"Z"}, {"D"}), world("C", "D")); }),
            ErrorCode::UnknownWaypoint);
  EXPECT_EQ(error_of([&] { execute_with_replan(scene, kTask, beliefs({"C"}, {"D"}), WorldState{{{"umbrella", "C"}}}); }),
            ErrorCode::UnknownObject);
}

TEST(TraceJsonl, RoundTrip) {
  const auto scene = star_graph();
  const TaskSpec task{"umbrella", "bag", "S"};
  const auto trace = execute_with_replan(scene, task, beliefs({"A", "B"}, {"D"}), world("B", "D"));
  const std::string text = trace_to_jsonl(trace);
  EXPECT_EQ(text.substr(0, text.find('\n')), R"({"action":"observe","args":["S"],"t":0})");
  const auto back = parse_trace_jsonl(text);
  EXPECT_EQ(back.actions, trace.actions);
  EXPECT_NO_THROW(validate_trace(scene, back));
}

TEST(TraceJsonl, RejectsBadLines) {
  EXPECT_EQ(error_of([] { parse_trace_jsonl("not json\n"); }), ErrorCode::MalformedTrace);
  EXPECT_EQ(error_of([] { parse_trace_jsonl(R"({"t":1,"action":"observe","args":["S"]})"); }),
            ErrorCode::MalformedTrace);
  EXPECT_EQ(error_of([] { parse_trace_jsonl(R"({"t":0,"action":"fly","args":["S"]})"); }), ErrorCode::MalformedTrace);
  EXPECT_EQ(error_of([] { parse_trace_jsonl(R"({"t":0,"action":"move","args":["S"]})"); }), ErrorCode::MalformedTrace);
}

TEST(TraceJsonl, ValidateRejectsImpossibleMoves) {
  const auto scene = star_graph();
  EXPECT_EQ(error_of([&] { validate_trace(scene, PlanTrace{{Action::move("A", "B")}, {}}); }),
            ErrorCode::MalformedTrace);
  EXPECT_EQ(error_of([&] {
              validate_trace(scene, PlanTrace{{Action::move("S", "A"), Action::pick("umbrella", "S")}, {}});
            }),
            ErrorCode::MalformedTrace);
}
