#pragma once

// Ground-truth generation, accuracy measures and the Monte-Carlo planning
// score for elicited scene insight.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ues/error.hpp"
#include "ues/insight.hpp"
#include "ues/planner.hpp"
#include "ues/scene.hpp"

namespace ues {

struct TruthEntry {
  WaypointId waypoint;
  double p = 0.0;

  friend bool operator==(const TruthEntry&, const TruthEntry&) = default;
};

using TruthDistribution = std::vector<TruthEntry>;

struct GroundTruth {
  std::map<std::string, TruthDistribution> objects;

  const TruthDistribution& at(const std::string& object) const {
    auto it = objects.find(object);
    if (it == objects.end()) throw Error(ErrorCode::UnknownObject, "ground truth has no entry for '" + object + "'");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Seeded sampling. The engine is std::mt19937_64; the variate transforms are
// spelled out so that files generated from a seed are identical everywhere.

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for simulation `index` under `seed`.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

inline double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::mt19937_64& gen, std::size_t n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v;
  do {
    v = gen();
  } while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

/// Uniform point on the (n-1)-simplex: normalized unit exponentials, i.e. a
/// symmetric Dirichlet with all concentrations 1.
inline std::vector<double> uniform_simplex(std::mt19937_64& gen, std::size_t n) {
  std::vector<double> out(n);
  double sum = 0.0;
  do {
    sum = 0.0;
    for (double& v : out) {
      v = -std::log1p(-uniform01(gen));
      sum += v;
    }
  } while (!(sum > 0.0));
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace rng

inline GroundTruth gen_ground_truth(const SceneBundle& scene, std::vector<WaypointId> candidates,
                                    std::size_t n_locations, std::uint64_t seed,
                                    const std::vector<std::string>& objects) {
  if (n_locations < 1) throw Error(ErrorCode::InvalidArgument, "n_locations must be positive");
  if (objects.empty()) throw Error(ErrorCode::InvalidArgument, "no objects to generate ground truth for");
  for (const auto& c : candidates) scene.waypoint_index(c);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.size() < n_locations) {
    throw Error(ErrorCode::InsufficientCandidates, std::to_string(candidates.size()) + " candidates for " +
                                                       std::to_string(n_locations) + " locations");
  }
  std::mt19937_64 gen(seed);
  GroundTruth truth;
  for (const auto& object : objects) {
    std::vector<WaypointId> pool = candidates;
    for (std::size_t i = 0; i < n_locations; ++i) {
      const std::size_t j = i + rng::uniform_index(gen, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    const auto probs = rng::uniform_simplex(gen, n_locations);
    TruthDistribution dist;
    for (std::size_t i = 0; i < n_locations; ++i) dist.push_back({pool[i], probs[i]});
    truth.objects[object] = std::move(dist);
  }
  return truth;
}

inline GroundTruth gen_ground_truth(const SceneBundle& scene, std::vector<WaypointId> candidates,
                                    std::size_t n_locations, std::uint64_t seed, const TaskSpec& task) {
  return gen_ground_truth(scene, std::move(candidates), n_locations, seed,
                          std::vector<std::string>{task.carried_object, task.container_object});
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::json objects = nlohmann::json::object();
  for (const auto& [object, dist] : truth.objects) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : dist) arr.push_back({{"waypoint", e.waypoint}, {"p", e.p}});
    objects[object] = arr;
  }
  return {{"objects", objects}};
}

/// Parses a ground-truth document; when a scene is given, waypoints are checked against it.
inline GroundTruth parse_ground_truth(const nlohmann::json& j, const SceneBundle* scene = nullptr) {
  GroundTruth truth;
  try {
    for (const auto& [object, arr] : j.at("objects").items()) {
      TruthDistribution dist;
      double sum = 0.0;
      std::set<WaypointId> seen;
      for (const auto& e : arr) {
        TruthEntry entry{e.at("waypoint").get<std::string>(), e.at("p").get<double>()};
        if (!(entry.p > 0.0 && entry.p <= 1.0)) throw Error(ErrorCode::MalformedTruth, "probabilities must lie in (0, 1]");
        if (!seen.insert(entry.waypoint).second) throw Error(ErrorCode::MalformedTruth, "duplicate truth waypoint");
        if (scene && !scene->find_waypoint(entry.waypoint)) {
          throw Error(ErrorCode::MalformedTruth, "unknown waypoint '" + entry.waypoint + "'");
        }
        sum += entry.p;
        dist.push_back(std::move(entry));
      }
      if (dist.empty() || std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::MalformedTruth, "distribution for '" + object + "' must sum to 1");
      }
      truth.objects[object] = std::move(dist);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedTruth, e.what());
  }
  return truth;
}

/// Truth support ordered by descending probability, ties by id.
inline std::vector<WaypointId> truth_ranking(const TruthDistribution& truth) {
  TruthDistribution sorted = truth;
  std::sort(sorted.begin(), sorted.end(), [](const TruthEntry& l, const TruthEntry& r) {
    return l.p > r.p || (l.p == r.p && l.waypoint < r.waypoint);
  });
  std::vector<WaypointId> out;
  for (auto& e : sorted) out.push_back(std::move(e.waypoint));
  return out;
}

inline WorldState sample_world(const GroundTruth& truth, std::mt19937_64& gen) {
  WorldState world;
  for (const auto& [object, dist] : truth.objects) {
    const double u = rng::uniform01(gen);
    double cumulative = 0.0;
    const WaypointId* chosen = &dist.back().waypoint;
    for (const auto& e : dist) {
      cumulative += e.p;
      if (u < cumulative) {
        chosen = &e.waypoint;
        break;
      }
    }
    world.object_locations[object] = *chosen;
  }
  return world;
}

// ---------------------------------------------------------------------------
// Accuracy measures

/// Cosine similarity of the two distributions as vectors over the waypoint
/// set. Waypoints outside both supports contribute zeros.
inline double cosine_accuracy(const CategoricalBelief& belief, const TruthDistribution& truth) {
  std::map<WaypointId, std::pair<double, double>> joint;
  for (const auto& [id, p] : belief.probabilities) joint[id].first += p;
  for (const auto& e : truth) joint[e.waypoint].second += e.p;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [id, ab] : joint) {
    dot += ab.first * ab.second;
    na += ab.first * ab.first;
    nb += ab.second * ab.second;
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::EmptyInsight, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

/// Optimal string alignment distance: insertions, deletions, substitutions
/// and adjacent transpositions, no substring edited more than once.
template <typename T>
std::size_t dl_distance(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[n][m];
}

/// Edit distance from the user's ranking to the truth ranking. A user ranking
/// that covers every truth waypoint is first cut to its shortest such prefix.
inline std::size_t rank_discrepancy(const WaypointRanking& user, const TruthDistribution& truth) {
  if (user.ranked.empty()) throw Error(ErrorCode::EmptyInsight, "ranking for '" + user.object_id + "' is empty");
  const auto target = truth_ranking(truth);
  std::set<WaypointId> missing(target.begin(), target.end());
  std::vector<WaypointId> processed;
  for (const auto& w : user.ranked) {
    processed.push_back(w);
    missing.erase(w);
    if (missing.empty()) break;
  }
  if (!missing.empty()) processed = user.ranked;
  return dl_distance(processed, target);
}

// ---------------------------------------------------------------------------
// Monte-Carlo planning score

struct ScoreResult {
  double mean_trace_length = 0.0;
  std::vector<std::size_t> lengths;
};

inline BeliefSet beliefs_from_insight(const std::map<std::string, CompiledInsight>& insight, const TaskSpec& task) {
  BeliefSet beliefs;
  for (const auto* object : {&task.carried_object, &task.container_object}) {
    auto it = insight.find(*object);
    if (it == insight.end()) throw Error(ErrorCode::EmptyInsight, "no insight for '" + *object + "'");
    beliefs[*object] = belief_from_insight(it->second);
    beliefs[*object].object_id = *object;
  }
  return beliefs;
}

/// Simulation `index` of a seeded run: samples a world from the truth with
/// stream sub_seed(seed, index) and executes the plan against it.
inline PlanTrace simulate_once(const SceneBundle& scene, const TaskSpec& task, const BeliefSet& beliefs,
                               const GroundTruth& truth, std::uint64_t seed, std::size_t index) {
  std::mt19937_64 gen(rng::sub_seed(seed, index));
  const WorldState world = sample_world(truth, gen);
  return execute_with_replan(scene, task, beliefs, world);
}

/// Mean trace length over `n_sims` simulations; simulation i samples its
/// world from the truth with stream sub_seed(seed, i), so the result does not
/// depend on `threads`.
inline ScoreResult score_insight(const SceneBundle& scene, const TaskSpec& task,
                                 const std::map<std::string, CompiledInsight>& insight, const GroundTruth& truth,
                                 std::size_t n_sims, std::uint64_t seed, unsigned threads = 1) {
  if (n_sims < 1) throw Error(ErrorCode::InvalidArgument, "n_sims must be positive");
  validate_task(scene, task);
  const BeliefSet beliefs = beliefs_from_insight(insight, task);
  GroundTruth task_truth;
  for (const auto* object : {&task.carried_object, &task.container_object}) {
    task_truth.objects[*object] = truth.at(*object);
    for (const auto& e : task_truth.objects[*object]) scene.waypoint_index(e.waypoint);
  }

  ScoreResult result;
  result.lengths.assign(n_sims, 0);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      result.lengths[i] = trace_length(simulate_once(scene, task, beliefs, task_truth, seed, i));
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_sims)));
  if (threads == 1) {
    run_range(0, n_sims);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (n_sims + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          run_range(std::min(n_sims, t * chunk), std::min(n_sims, (t + 1) * chunk));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  double sum = 0.0;
  for (auto len : result.lengths) sum += static_cast<double>(len);
  result.mean_trace_length = sum / static_cast<double>(n_sims);
  return result;
}

// ---------------------------------------------------------------------------
// Sessions and reports

struct SessionRecord {
  std::string session_id;
  InterfaceKind interface_kind = InterfaceKind::Precision;
  std::map<std::string, InsightPayload> payloads;  // keyed by object id
  double duration_s = 0.0;
};

struct ScoreRow {
  std::string session_id;
  InterfaceKind interface_kind = InterfaceKind::Precision;
  double mean_trace_length = 0.0;
  std::optional<double> accuracy;  // precision and paint only
  std::size_t rank_discrepancy = 0;  // summed over task objects
  double duration_s = 0.0;
  std::size_t n_sims = 0;
  std::uint64_t seed = 0;
  std::string truth_id;
};

/// Compiles a session's insight and computes every per-session measure.
/// Accuracy is the mean over task objects; rank discrepancy is their sum.
inline ScoreRow score_session(const VoronoiAssignment& assignment, const TaskSpec& task, const SessionRecord& record,
                              const GroundTruth& truth, std::size_t n_sims, std::uint64_t seed,
                              unsigned threads = 1) {
  const SceneBundle& scene = assignment.scene();
  std::map<std::string, CompiledInsight> compiled;
  ScoreRow row;
  row.session_id = record.session_id;
  row.interface_kind = record.interface_kind;
  row.duration_s = record.duration_s;
  row.n_sims = n_sims;
  row.seed = seed;
  double accuracy_sum = 0.0;
  for (const auto* object : {&task.carried_object, &task.container_object}) {
    auto it = record.payloads.find(*object);
    if (it == record.payloads.end()) throw Error(ErrorCode::EmptyInsight, "session has no insight for '" + *object + "'");
    if (interface_of(it->second) != record.interface_kind) {
      throw Error(ErrorCode::MalformedPayload, "payload interface does not match session interface");
    }
    CompiledInsight insight = compile_insight(it->second, assignment);
    const auto& object_truth = truth.at(*object);
    WaypointRanking ranking;
    if (auto* belief = std::get_if<CategoricalBelief>(&insight)) {
      ranking = belief_to_ranking(*belief);
      accuracy_sum += cosine_accuracy(*belief, object_truth);
    } else {
      ranking = std::get<WaypointRanking>(insight);
    }
    row.rank_discrepancy += rank_discrepancy(ranking, object_truth);
    compiled.emplace(*object, std::move(insight));
  }
  if (record.interface_kind != InterfaceKind::Rank) row.accuracy = accuracy_sum / 2.0;
  row.mean_trace_length = score_insight(scene, task, compiled, truth, n_sims, seed, threads).mean_trace_length;
  return row;
}

struct MetricSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
};

inline MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

struct InterfaceAggregate {
  InterfaceKind interface_kind = InterfaceKind::Precision;
  std::size_t sessions = 0;
  MetricSummary mean_trace_length;
  MetricSummary accuracy;
  MetricSummary rank_discrepancy;
  MetricSummary duration_s;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  std::vector<InterfaceAggregate> aggregates;  // one per interface present
};

inline ScoreReport aggregate_report(std::vector<ScoreRow> rows) {
  ScoreReport report;
  for (auto kind : {InterfaceKind::Precision, InterfaceKind::Paint, InterfaceKind::Rank}) {
    std::vector<double> length, accuracy, discrepancy, duration;
    for (const auto& r : rows) {
      if (r.interface_kind != kind) continue;
      length.push_back(r.mean_trace_length);
      if (r.accuracy) accuracy.push_back(*r.accuracy);
      discrepancy.push_back(static_cast<double>(r.rank_discrepancy));
      duration.push_back(r.duration_s);
    }
    if (length.empty()) continue;
    report.aggregates.push_back(
        {kind, length.size(), summarize(length), summarize(accuracy), summarize(discrepancy), summarize(duration)});
  }
  report.rows = std::move(rows);
  return report;
}

namespace detail {

inline std::string format_number(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace detail

inline std::string report_csv(const ScoreReport& report) {
  std::string out = "session_id,interface,mean_trace_length,accuracy,rank_discrepancy,duration_s\n";
  for (const auto& r : report.rows) {
    out += r.session_id + "," + std::string(to_string(r.interface_kind)) + "," +
           detail::format_number(r.mean_trace_length, 6) + "," +
           (r.accuracy ? detail::format_number(*r.accuracy, 6) : std::string()) + "," +
           std::to_string(r.rank_discrepancy) + "," + detail::format_number(r.duration_s, 3) + "\n";
  }
  return out;
}

inline nlohmann::json score_row_to_json(const ScoreRow& r) {
  nlohmann::json j = {{"session_id", r.session_id},
                      {"interface", std::string(to_string(r.interface_kind))},
                      {"mean_trace_length", r.mean_trace_length},
                      {"rank_discrepancy", r.rank_discrepancy},
                      {"duration_s", r.duration_s},
                      {"n_sims", r.n_sims},
                      {"seed", r.seed},
                      {"truth_id", r.truth_id}};
  j["accuracy"] = r.accuracy ? nlohmann::json(*r.accuracy) : nlohmann::json(nullptr);
  return j;
}

inline ScoreRow score_row_from_json(const nlohmann::json& j) {
  ScoreRow r;
  r.session_id = j.at("session_id").get<std::string>();
  r.interface_kind = parse_interface(j.at("interface").get<std::string>());
  r.mean_trace_length = j.at("mean_trace_length").get<double>();
  if (!j.at("accuracy").is_null()) r.accuracy = j.at("accuracy").get<double>();
  r.rank_discrepancy = j.at("rank_discrepancy").get<std::size_t>();
  r.duration_s = j.at("duration_s").get<double>();
  r.n_sims = j.at("n_sims").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.truth_id = j.value("truth_id", "");
  return r;
}

inline nlohmann::json report_aggregate_json(const ScoreReport& report) {
  auto summary = [](const MetricSummary& s) { return nlohmann::json{{"n", s.count}, {"mean", s.mean}, {"sd", s.sd}}; };
  nlohmann::json aggregates = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    aggregates.push_back({{"interface", std::string(to_string(a.interface_kind))},
                          {"sessions", a.sessions},
                          {"mean_trace_length", summary(a.mean_trace_length)},
                          {"accuracy", summary(a.accuracy)},
                          {"rank_discrepancy", summary(a.rank_discrepancy)},
                          {"duration_s", summary(a.duration_s)}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(score_row_to_json(r));
  return {{"aggregates", aggregates}, {"rows", rows}};
}

}  // namespace ues
