// Command-line front end: the HTTP service plus batch tools that work
// directly on bundle, session, truth and trace files.

#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ues/ues.hpp"

namespace fs = std::filesystem;

namespace {

std::string env_or(const char* name, std::string fallback) {
  if (const char* v = std::getenv(name); v && *v) return v;
  return fallback;
}

void write_output(const std::optional<std::string>& path, const std::string& content) {
  if (!path) {
    std::cout << content;
    return;
  }
  ues::atomic_write(*path, content);
}

ues::LoadedScene resolve_scene(const std::string& ref, const std::string& store_dir) {
  if (fs::is_regular_file(ref)) return ues::load_scene_with_cells(ref, fs::path(ref).stem().string());
  return ues::Store(store_dir).scene(ref);
}

ues::Session resolve_session(const std::string& ref, const std::string& store_dir) {
  if (fs::is_regular_file(ref)) {
    const std::string text = ues::read_file(ref, ues::ErrorCode::UnknownSession);
    try {
      return ues::session_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw ues::Error(ues::ErrorCode::MalformedPayload, std::string("session file is not JSON: ") + e.what());
    }
  }
  return ues::Store(store_dir).session(ref);
}

std::pair<ues::GroundTruth, std::string> resolve_truth(const std::string& ref, const std::string& store_dir,
                                                       const ues::SceneBundle& scene) {
  if (fs::is_regular_file(ref)) {
    const std::string text = ues::read_file(ref, ues::ErrorCode::UnknownTruth);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ues::Error(ues::ErrorCode::MalformedTruth, e.what());
    }
    return {ues::parse_ground_truth(j, &scene), fs::path(ref).stem().string()};
  }
  return {ues::Store(store_dir).truth(ref, &scene), ref};
}

volatile std::sig_atomic_t g_stop = 0;
ues::HttpService* g_server = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene insight elicitation toolkit"};
  app.require_subcommand(1);
  std::string store_dir = env_or("UES_STORE", "ues-store");
  app.add_option("--store", store_dir, "Store root directory (env UES_STORE)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP elicitation service");
  ues::ServiceConfig config;
  config.port = std::atoi(env_or("UES_PORT", "8080").c_str());
  serve->add_option("--host", config.host, "Bind address");
  serve->add_option("--port", config.port, "Port (env UES_PORT, 0 for ephemeral)");
  serve->add_option("--scene", config.scenes, "Scene bundle files to expose (id = file stem)");
  std::string static_dir;
  serve->add_option("--static", static_dir, "Directory with UI assets");
  serve->add_option("--threads", config.sim_threads, "Worker threads per simulation request");

  // validate-map
  auto* validate = app.add_subcommand("validate-map", "Load and validate a scene bundle");
  std::string bundle_path;
  bool propose = false;
  validate->add_option("bundle", bundle_path, "Scene bundle JSON")->required();
  validate->add_flag("--propose-edges", propose, "Print advisory nav edges derived from Voronoi adjacency");

  // gen-truth
  auto* gen = app.add_subcommand("gen-truth", "Sample a ground-truth distribution");
  std::string gen_scene;
  std::size_t n_locations = 3;
  std::uint64_t seed = 0;
  std::vector<std::string> candidates, objects;
  std::optional<std::string> out_path;
  std::optional<std::string> save_id;
  gen->add_option("scene", gen_scene, "Scene bundle file or store scene id")->required();
  gen->add_option("--n", n_locations, "Locations per object");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--candidates", candidates, "Candidate waypoints (default: scene candidates)")->delimiter(',');
  gen->add_option("--objects", objects, "Object ids (default: scene task objects)")->delimiter(',');
  gen->add_option("--out", out_path, "Write to file instead of stdout");
  gen->add_option("--save-as", save_id, "Also store under this truth id");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Score one submitted session against a ground truth");
  std::string session_ref, truth_ref;
  std::size_t n_sims = 50;
  unsigned threads = 1;
  std::optional<std::string> scene_override, trace_out;
  bool as_json = false;
  sim->add_option("session", session_ref, "Session file or store session id")->required();
  sim->add_option("truth", truth_ref, "Truth file or store truth id")->required();
  sim->add_option("--sims", n_sims, "Number of simulations");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--threads", threads, "Worker threads");
  sim->add_option("--scene", scene_override, "Scene bundle file (default: the session's scene in the store)");
  sim->add_option("--trace-out", trace_out, "Write the trace of simulation 0 as JSON lines");
  sim->add_flag("--json", as_json, "Print the score row as JSON");

  // score
  auto* score = app.add_subcommand("score", "Batch-score stored sessions");
  bool all = false;
  std::optional<std::string> csv_out, json_out;
  score->add_flag("--all", all, "Score every submitted session that names a truth")->required();
  score->add_option("--sims", n_sims, "Number of simulations per session");
  score->add_option("--seed", seed, "RNG seed");
  score->add_option("--threads", threads, "Worker threads");
  score->add_option("--csv", csv_out, "Write the CSV report here instead of stdout");
  score->add_option("--json", json_out, "Write the JSON aggregate here");

  // replay
  auto* replay = app.add_subcommand("replay", "Print and check an exported trace");
  std::string trace_path;
  replay->add_option("trace", trace_path, "Trace JSON-lines file")->required();
  replay->add_option("--scene", scene_override, "Scene bundle to validate moves against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*serve) {
      if (!static_dir.empty()) config.static_dir = static_dir;
      config.store = store_dir;
      auto store = std::make_shared<ues::Store>(config.store);
      for (const auto& s : config.scenes) store->register_scene(s);
      auto service = std::make_shared<ues::SessionService>(store, ues::now_seconds, config.sim_threads);
      ues::HttpService http(service, config.static_dir);
      const int port = http.bind(config.host, config.port);
      g_server = &http;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << config.host << ":" << port << std::endl;
      http.run();
      g_server = nullptr;
      return 0;
    }

    if (*validate) {
      const auto scene = ues::load_scene_with_cells(bundle_path, fs::path(bundle_path).stem().string());
      const auto& b = *scene.bundle;
      std::cout << "ok: " << b.map.width << "x" << b.map.height << " map, " << b.areas.size() << " areas, "
                << b.waypoints.size() << " waypoints, " << b.nav_edges.size() << " nav edges\n";
      if (propose) {
        for (const auto& [a, c] : ues::propose_nav_edges(*scene.assignment)) std::cout << a << " " << c << "\n";
      }
      return 0;
    }

    if (*gen) {
      const auto scene = resolve_scene(gen_scene, store_dir);
      const auto& b = *scene.bundle;
      if (candidates.empty()) candidates = b.task.candidates;
      if (candidates.empty()) {
        for (const auto& w : b.waypoints) candidates.push_back(w.id);
      }
      if (objects.empty()) objects = {b.task.carried, b.task.container};
      const auto truth = ues::gen_ground_truth(b, candidates, n_locations, seed, objects);
      write_output(out_path, ues::ground_truth_to_json(truth).dump(2) + "\n");
      if (save_id) ues::Store(store_dir).save_truth(*save_id, truth);
      return 0;
    }

    if (*sim) {
      const auto session = resolve_session(session_ref, store_dir);
      const auto scene =
          scene_override ? ues::load_scene_with_cells(*scene_override, session.scene_id) : resolve_scene(session.scene_id, store_dir);
      const auto [truth, truth_id] = resolve_truth(truth_ref, store_dir, *scene.bundle);
      const auto row = ues::simulate_session(scene, session, truth, truth_id, n_sims, seed, threads);
      if (as_json) {
        std::cout << ues::score_row_to_json(row).dump(2) << "\n";
      } else {
        std::cout << ues::report_csv(ues::aggregate_report({row}));
      }
      if (trace_out) {
        const auto task = ues::default_task(*scene.bundle);
        std::map<std::string, ues::CompiledInsight> compiled;
        for (const auto& [object, payload] : ues::session_record(session).payloads) {
          compiled.emplace(object, ues::compile_insight(payload, *scene.assignment));
        }
        ues::GroundTruth task_truth;
        for (const auto* o : {&task.carried_object, &task.container_object}) task_truth.objects[*o] = truth.at(*o);
        const auto trace =
            ues::simulate_once(*scene.bundle, task, ues::beliefs_from_insight(compiled, task), task_truth, seed, 0);
        ues::atomic_write(*trace_out, ues::trace_to_jsonl(trace));
      }
      return 0;
    }

    if (*score) {
      ues::Store store(store_dir);
      std::vector<ues::ScoreRow> rows;
      for (const auto& id : store.session_ids()) {
        const auto session = store.session(id);
        if (session.state != ues::SessionState::Submitted || !session.truth_id) {
          std::cerr << "skipping " << id << ": " << (session.truth_id ? "not submitted" : "no truth_id") << "\n";
          continue;
        }
        rows.push_back(ues::simulate_session(store, session, *session.truth_id, n_sims, seed, threads));
      }
      const auto report = ues::aggregate_report(std::move(rows));
      write_output(csv_out, ues::report_csv(report));
      if (json_out) ues::atomic_write(*json_out, ues::report_aggregate_json(report).dump(2) + "\n");
      return 0;
    }

    if (*replay) {
      const auto trace = ues::parse_trace_jsonl(ues::read_file(trace_path, ues::ErrorCode::MalformedTrace));
      if (scene_override) ues::validate_trace(ues::load_scene_file(*scene_override), trace);
      for (std::size_t t = 0; t < trace.actions.size(); ++t) {
        std::cout << t << " " << ues::to_string(trace.actions[t]) << "\n";
      }
      std::cout << "length " << ues::trace_length(trace) << (trace.succeeded() ? " (completed)" : " (incomplete)")
                << "\n";
      return 0;
    }
  } catch (const ues::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
