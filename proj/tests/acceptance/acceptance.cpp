// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "support/oracles.hpp"
#include "ues/service.hpp"

using namespace ues;
using namespace ues::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s %-28s %s [%.2fs]\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::map<WaypointId, double> precision_oracle(const SceneBundle& scene, const PrecisionInput& in) {
  double sum = 0.0;
  for (const auto& p : in.points) sum += p.slider;
  std::map<WaypointId, double> out;
  for (const auto& p : in.points) {
    const double mass = sum > 1.0 ? p.slider / sum : p.slider;
    if (mass > 0.0) out[brute_nearest(scene.waypoints, p.position)] += mass;
  }
  return out;
}

std::map<WaypointId, double> paint_oracle(const SceneBundle& scene, const PaintField& field) {
  std::map<WaypointId, double> sums;
  double total = 0.0;
  for (int y = 0; y < scene.map.height; ++y) {
    for (int x = 0; x < scene.map.width; ++x) {
      const double b = field.at({x, y});
      if (b <= 0.0) continue;
      sums[brute_nearest(scene.waypoints, pixel_center({x, y}))] += b;
      total += b;
    }
  }
  for (auto& [id, v] : sums) v /= total;
  return sums;
}

double max_abs_diff(const std::map<WaypointId, double>& a, const std::map<WaypointId, double>& b) {
  double worst = a.size() == b.size() ? 0.0 : 1.0;
  for (const auto& [id, p] : b) {
    auto it = a.find(id);
    worst = std::max(worst, it == a.end() ? 1.0 : std::abs(it->second - p));
  }
  return worst;
}

// --------------------------------------------------------------------------

Outcome voronoi_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2024);
  std::size_t mismatches = 0, pixels = 0;
  for (int s = 0; s < 25; ++s) {
    const auto scene = random_scene(gen, {.width = 50, .height = 50, .min_waypoints = 3, .max_waypoints = 12,
                                          .integer_positions = s % 2 == 0});
    const auto cells = voronoi_assign(scene);
    for (int y = 0; y < 50; ++y) {
      for (int x = 0; x < 50; ++x) {
        ++pixels;
        if (cells.owner({x, y}) != brute_nearest(scene.waypoints, pixel_center({x, y}))) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 5.0,
          fmt("25 scenes, %zu pixels, %zu mismatches, %.2fs (limit 5s)", pixels, mismatches, secs)};
}

Outcome belief_math() {
  std::mt19937_64 gen(77);
  double worst_precision = 0.0, worst_paint = 0.0, worst_sum_precision = 0.0, worst_sum_paint = 0.0;
  std::uniform_real_distribution<double> coord(0.0, 50.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> pix(0, 49);
  for (int i = 0; i < 100; ++i) {
    auto scene = std::make_shared<const SceneBundle>(random_scene(gen, {.integer_positions = i % 2 == 0}));
    const auto cells = voronoi_assign(scene);
    PrecisionInput in{"umbrella", {}};
    double sum = 0.0;
    for (int k = 0; k < 1 + i % 7; ++k) {
      in.points.push_back({{coord(gen), coord(gen)}, unit(gen)});
      sum += in.points.back().slider;
    }
    const auto belief = precision_to_belief(in, cells);
    worst_precision = std::max(worst_precision, max_abs_diff(belief.probabilities, precision_oracle(*scene, in)));
    worst_sum_precision = std::max(worst_sum_precision, std::abs(belief.total() - std::min(1.0, sum)));
  }
  for (int i = 0; i < 100; ++i) {
    auto scene = std::make_shared<const SceneBundle>(random_scene(gen, {.integer_positions = i % 2 == 0}));
    const auto cells = voronoi_assign(scene);
    PaintField field{"bag", {}};
    for (int k = 0; k < 1 + i * 10; ++k) field.brightness[{pix(gen), pix(gen)}] = unit(gen);
    const auto belief = paint_to_belief(field, cells);
    worst_paint = std::max(worst_paint, max_abs_diff(belief.probabilities, paint_oracle(*scene, field)));
    worst_sum_paint = std::max(worst_sum_paint, std::abs(belief.total() - 1.0));
  }
  const bool pass = worst_precision <= 1e-9 && worst_paint <= 1e-9 && worst_sum_precision <= 1e-9 &&
                    worst_sum_paint <= 1e-9;
  return {pass, fmt("max |diff| precision %.1e paint %.1e; sum error precision %.1e paint %.1e (tol 1e-9)",
                    worst_precision, worst_paint, worst_sum_precision, worst_sum_paint)};
}

Outcome normalization_branch() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t below = 0, above = 0, bad = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> s(1 + i % 6);
    for (auto& v : s) v = unit(gen) * (i % 3 == 0 ? 0.2 : 1.0);
    const double sum = std::accumulate(s.begin(), s.end(), 0.0);
    const auto out = normalize_sliders(s);
    if (sum <= 1.0) {
      ++below;
      bad += out != s;
    } else {
      ++above;
      for (std::size_t k = 0; k < s.size(); ++k) bad += out[k] != s[k] / sum;
    }
  }
  return {bad == 0 && below > 0 && above > 0,
          fmt("%zu vectors with sum<=1, %zu with sum>1, %zu mismatches", below, above, bad)};
}

Outcome dl_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::vector<char>> seqs{{}};
  for (std::size_t begin = 0, len = 1; len <= 5; ++len) {
    const std::size_t end = seqs.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char c : {'a', 'b', 'c'}) {
        auto next = seqs[i];
        next.push_back(c);
        seqs.push_back(std::move(next));
      }
    }
    begin = end;
  }
  std::size_t pairs = 0, mismatches = 0;
  for (const auto& a : seqs) {
    for (const auto& b : seqs) {
      ++pairs;
      if (dl_distance(a, b) != osa_recursive(a, b)) ++mismatches;
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          fmt("%zu sequences, %zu pairs, %zu mismatches, %.2fs (limit 10s)", seqs.size(), pairs, mismatches, secs)};
}

Outcome metric_identities() {
  const auto scene = simple_scene(60, 60,
                                  {{"a", {5, 5}}, {"b", {30, 5}}, {"c", {55, 5}}, {"d", {5, 30}}, {"e", {30, 30}},
                                   {"f", {55, 30}}, {"g", {5, 55}}, {"h", {30, 55}}, {"i", {55, 55}}},
                                  {{"a", "b"}, {"b", "c"}, {"d", "e"}, {"e", "f"}, {"g", "h"}, {"h", "i"},
                                   {"a", "d"}, {"d", "g"}, {"b", "e"}, {"e", "h"}, {"c", "f"}, {"f", "i"}});
  std::vector<WaypointId> all;
  for (const auto& w : scene.waypoints) all.push_back(w.id);
  double worst_self = 0.0, worst_disjoint = 0.0;
  std::size_t nonzero_rank = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto truth = gen_ground_truth(scene, all, 1 + seed % 4, seed, std::vector<std::string>{"x"}).at("x");
    CategoricalBelief self{"x", {}};
    for (const auto& e : truth) self.probabilities[e.waypoint] = e.p;
    worst_self = std::max(worst_self, std::abs(cosine_accuracy(self, truth) - 1.0));
    CategoricalBelief disjoint{"x", {}};
    for (const auto& id : all) {
      if (!self.probabilities.count(id)) disjoint.probabilities[id] = 1.0 / 9.0;
    }
    worst_disjoint = std::max(worst_disjoint, cosine_accuracy(disjoint, truth));
    nonzero_rank += rank_discrepancy({"x", truth_ranking(truth)}, truth) != 0;
  }
  return {worst_self <= 1e-9 && worst_disjoint == 0.0 && nonzero_rank == 0,
          fmt("100 truths: max |cos(d,d)-1| %.1e, max disjoint cos %.1e, nonzero self discrepancies %zu", worst_self,
              worst_disjoint, nonzero_rank)};
}

Outcome planner_oracle() {
  const auto start = std::chrono::steady_clock::now();
  struct Case {
    SceneBundle scene;
    std::size_t max_list;
  };
  // Symmetric layouts so that path and fallback ties are common.
  std::vector<Case> cases;
  cases.push_back({simple_scene(40, 10, {{"B", {10, 5}}, {"A", {0, 5}}, {"C", {20, 5}}, {"D", {30, 5}}},
                                {{"A", "B"}, {"B", "C"}, {"C", "D"}}),
                   4});
  cases.push_back({simple_scene(20, 20, {{"n", {0, 0}}, {"e", {20, 0}}, {"s", {20, 20}}, {"w", {0, 20}}, {"m", {10, 10}}},
                                {{"n", "e"}, {"e", "s"}, {"s", "w"}, {"w", "n"}, {"m", "n"}, {"m", "e"}, {"m", "s"},
                                 {"m", "w"}}),
                   3});
  cases.push_back({simple_scene(30, 30,
                                {{"p3", {15, 0}}, {"p1", {0, 10}}, {"p5", {30, 10}}, {"p2", {0, 20}}, {"p6", {30, 20}},
                                 {"p4", {15, 30}}},
                                {{"p3", "p1"}, {"p1", "p2"}, {"p2", "p4"}, {"p4", "p6"}, {"p6", "p5"}, {"p5", "p3"},
                                 {"p1", "p5"}}),
                   2});
  std::size_t runs = 0, mismatches = 0;
  for (const auto& c : cases) {
    const TaskSpec task = default_task(c.scene);
    std::vector<WaypointId> ids;
    for (const auto& w : c.scene.waypoints) ids.push_back(w.id);
    const auto lists = ordered_subsets(ids, c.max_list);
    for (const auto& u : lists) {
      for (const auto& g : lists) {
        const BeliefSet beliefs{{"umbrella", {"umbrella", u, 0}}, {"bag", {"bag", g, 0}}};
        for (const auto& wu : ids) {
          for (const auto& wg : ids) {
            const WorldState world{{{"umbrella", wu}, {"bag", wg}}};
            const auto got = execute_with_replan(c.scene, task, beliefs, world);
            const auto want = reference_simulate(c.scene, task, beliefs, world);
            ++runs;
            if (got.actions != want.actions || !got.succeeded()) ++mismatches;
          }
        }
      }
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 30.0,
          fmt("3 scenes (4/5/6 waypoints), %zu belief/world combinations, %zu mismatches, %.2fs (limit 30s)", runs,
              mismatches, secs)};
}

Outcome perfect_insight() {
  std::mt19937_64 gen(99);
  std::size_t mismatches = 0;
  for (int s = 0; s < 50; ++s) {
    const auto scene = random_scene(gen, {.width = 100, .height = 100, .min_waypoints = 2, .max_waypoints = 30,
                                          .extra_edge_probability = 0.1, .integer_positions = false});
    const TaskSpec task = default_task(scene);
    std::uniform_int_distribution<std::size_t> pick(0, scene.waypoints.size() - 1);
    const auto u = scene.waypoints[pick(gen)].id, g = scene.waypoints[pick(gen)].id;
    const BeliefSet beliefs{{"umbrella", {"umbrella", {u}, 0}}, {"bag", {"bag", {g}, 0}}};
    const auto trace = execute_with_replan(scene, task, beliefs, {{{"umbrella", u}, {"bag", g}}});
    const auto expected = shortest_hops(scene, task.start_waypoint, u) + 1 + shortest_hops(scene, u, g) + 1;
    mismatches += trace_length(trace) != expected;
  }
  return {mismatches == 0, fmt("50 scenes, %zu mismatches against hop-count oracle", mismatches)};
}

Outcome determinism() {
  auto scene = std::make_shared<const SceneBundle>(load_scene_file(UES_DATA_DIR "/study_map.json"));
  const TaskSpec task = default_task(*scene);
  const auto truth = gen_ground_truth(*scene, scene->task.candidates, 3, 8, task);
  const std::map<std::string, CompiledInsight> insight{
      {"umbrella", WaypointRanking{"umbrella", {"kt_west", "of_desk", "st_rack"}}},
      {"bag", CategoricalBelief{"bag", {{"mr_nw", 0.5}, {"cp_copier", 0.3}}}}};
  const auto reference = score_insight(*scene, task, insight, truth, 50, 31337, 1);
  std::size_t differing = 0;
  for (int repeat = 0; repeat < 5; ++repeat) {
    for (unsigned threads : {1u, 4u}) {
      const auto r = score_insight(*scene, task, insight, truth, 50, 31337, threads);
      differing += r.lengths != reference.lengths ||
                   std::memcmp(&r.mean_trace_length, &reference.mean_trace_length, sizeof(double)) != 0;
    }
  }
  return {differing == 0, fmt("5 repeats x {1, 4} threads, mean %.6f, %zu differing runs", reference.mean_trace_length,
                              differing)};
}

Outcome qualitative_replication() {
  const auto start = std::chrono::steady_clock::now();
  auto scene = std::make_shared<const SceneBundle>(load_scene_file(UES_DATA_DIR "/study_map.json"));
  const TaskSpec task = default_task(*scene);
  int better = 0;
  std::string lines;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto truth = gen_ground_truth(*scene, scene->task.candidates, 3, seed, task);
    std::map<std::string, CompiledInsight> good, reversed;
    for (const auto* o : {&task.carried_object, &task.container_object}) {
      auto ranking = truth_ranking(truth.at(*o));
      good.emplace(*o, WaypointRanking{*o, ranking});
      std::reverse(ranking.begin(), ranking.end());
      reversed.emplace(*o, WaypointRanking{*o, ranking});
    }
    const double g = score_insight(*scene, task, good, truth, 50, seed).mean_trace_length;
    const double r = score_insight(*scene, task, reversed, truth, 50, seed).mean_trace_length;
    better += g < r;
    lines += fmt(" %.2f/%.2f", g, r);
  }
  const double secs = seconds_since(start);
  return {better >= 18 && secs < 120.0,
          fmt("argmax shorter in %d/20 truths (need 18), %.2fs (limit 120s); argmax/reversed:%s", better, secs,
              lines.c_str())};
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string("\"") + UES_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome service_round_trip() {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("ues-acceptance-" + std::to_string(rd()));
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{root};
  const fs::path store_dir = root / "store";
  const fs::path bundle = UES_DATA_DIR "/study_map.json";
  auto store = std::make_shared<Store>(store_dir);
  store->register_scene(bundle);
  const auto scene = store->scene("study_map");
  store->save_truth("t1", gen_ground_truth(*scene.bundle, scene.bundle->task.candidates, 3, 5,
                                           default_task(*scene.bundle)));
  auto service = std::make_shared<SessionService>(store);
  HttpService http(service);
  const int port = http.bind("127.0.0.1", 0);
  std::thread server([&] { http.run(); });
  http.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  const std::map<std::string, std::pair<json, json>> inputs{
      {"precision",
       {{{"object_id", "umbrella"}, {"interface", "precision"},
         {"points", {{{"x", 145}, {"y", 255}, {"slider", 0.6}}, {{"x", 370}, {"y", 60}, {"slider", 0.3}}}}},
        {{"object_id", "bag"}, {"interface", "precision"}, {"points", {{{"x", 192}, {"y", 57}, {"slider", 0.9}}}}}}},
      {"paint",
       {{{"object_id", "umbrella"}, {"interface", "paint"},
         {"paint", {{{"x", 244}, {"y", 257}, {"b", 1.0}}, {{"x", 140}, {"y", 214}, {"b", 0.4}}}}},
        {{"object_id", "bag"}, {"interface", "paint"}, {"paint", {{{"x", 116}, {"y", 16}, {"b", 0.7}}}}}}},
      {"rank",
       {{{"object_id", "umbrella"}, {"interface", "rank"}, {"points", {{{"x", 372}, {"y", 65}}, {{"x", 246}, {"y", 258}}}}},
        {{"object_id", "bag"}, {"interface", "rank"}, {"points", {{{"x", 190}, {"y", 55}}}}}}}};

  std::string detail;
  bool pass = true;
  for (const auto& [iface, payloads] : inputs) {
    auto created = client.Post("/api/sessions", json{{"scene_id", "study_map"}, {"interface", iface}}.dump(),
                               "application/json");
    if (!created || created->status != 201) return {false, iface + ": create failed"};
    const std::string id = json::parse(created->body).at("id");
    const std::string base = "/api/sessions/" + id;
    for (const auto& body : {payloads.first, payloads.second}) {
      auto put = client.Put(base + "/insight/" + body.at("object_id").get<std::string>(), body.dump(),
                            "application/json");
      if (!put || put->status != 200) return {false, iface + ": put failed " + (put ? put->body : "")};
    }
    if (auto sub = client.Post(base + "/submit", "{}", "application/json"); !sub || sub->status != 200) {
      return {false, iface + ": submit failed"};
    }
    auto sim = client.Post("/api/simulate", json{{"session_id", id}, {"truth_id", "t1"}, {"n_sims", 50}, {"seed", 9}}.dump(),
                           "application/json");
    if (!sim || sim->status != 200) return {false, iface + ": simulate failed " + (sim ? sim->body : "")};
    const auto api_row = json::parse(sim->body);

    // CLI pipeline on plain files: exported session, truth and bundle.
    const auto session_doc = json::parse(client.Get(base)->body);
    const fs::path session_file = root / (id + ".json"), truth_file = root / "t1.json", out = root / "cli.json";
    std::ofstream(session_file) << session_doc.dump(2);
    std::ofstream(truth_file) << ground_truth_to_json(store->truth("t1")).dump(2);
    if (run_cli("simulate \"" + session_file.string() + "\" \"" + truth_file.string() + "\" --scene \"" +
                    bundle.string() + "\" --sims 50 --seed 9 --json",
                out) != 0) {
      return {false, iface + ": cli failed: " + slurp(out)};
    }
    const auto cli_row = json::parse(slurp(out));
    const bool same = cli_row == api_row;
    pass = pass && same;
    detail += fmt("%s %s mean=%.4f; ", iface.c_str(), same ? "identical" : "DIFFERENT",
                  api_row.at("mean_trace_length").get<double>());
  }
  http.stop();
  server.join();
  return {pass, detail + "(API vs CLI score rows compared exactly)"};
}

}  // namespace

int main() {
  report("voronoi-oracle", voronoi_oracle);
  report("belief-math", belief_math);
  report("normalization-branch", normalization_branch);
  report("dl-oracle", dl_oracle);
  report("metric-identities", metric_identities);
  report("planner-oracle", planner_oracle);
  report("perfect-insight-optimality", perfect_insight);
  report("determinism", determinism);
  report("qualitative-replication", qualitative_replication);
  report("service-round-trip", service_round_trip);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
