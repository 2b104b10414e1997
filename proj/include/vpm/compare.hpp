#pragma once

#include <atomic>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "vpm/checkpoint.hpp"
#include "vpm/episode.hpp"
#include "vpm/planners.hpp"
#include "vpm/ppo.hpp"

namespace vpm {

// Policy spec strings accepted by the CLI and the comparison grid:
// "random", "gcs", "tspc", or "net:<checkpoint path>".
struct PolicyContext {
  const GridMap& map;
  int fov = 25;
  double d_min = 12.0;
  Rng rng;
  const Tour* tour = nullptr;            // prebuilt cycle for tspc, optional
  const Checkpoint* checkpoint = nullptr;  // preloaded net, optional
};

inline std::unique_ptr<Policy> build_policy(const std::string& spec, int n_agents,
                                            PolicyContext ctx) {
  if (spec == "random") return std::make_unique<RandomPolicy>(ctx.rng);
  if (spec == "gcs") return std::make_unique<GcsPolicy>(ctx.d_min);
  if (spec == "tspc") {
    if (ctx.tour) return std::make_unique<TspcPolicy>(*ctx.tour, n_agents);
    return std::make_unique<TspcPolicy>(make_tspc_policy(ctx.map, ctx.fov, n_agents));
  }
  if (spec.rfind("net:", 0) == 0) {
    Checkpoint local;
    const Checkpoint* ck = ctx.checkpoint;
    if (!ck) {
      local = load_checkpoint(spec.substr(4));
      ck = &local;
    }
    const ObsMode mode = obs_mode_from_name(ck->config.require_str("obs_mode"));
    return std::make_unique<NetPolicy>(ck->net, mode, ctx.rng, /*greedy=*/true);
  }
  throw std::invalid_argument("unknown policy spec: " + spec +
                              " (expected random, gcs, tspc or net:<path>)");
}

struct CompareSpec {
  std::vector<std::string> maps;      // map file paths
  std::vector<std::string> policies;  // policy spec strings
  std::vector<int> agent_counts;
  std::vector<std::uint64_t> seeds;
  int steps = 500;
  int fov = 25;
  double decay = 1.0;
  double max_penalty = 400.0;
  double d_min = 12.0;
  int jobs = 1;
};

struct RunRecord {
  std::string policy;
  std::string map;
  int n_train = -1;  // agents the checkpoint was trained with; -1 for baselines
  int n_test = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  bool ok = false;
  std::string error;
  double cumulative_penalty = 0.0;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;
};

namespace detail {

struct CompareAssets {
  std::map<std::string, LoadedMap> maps;
  std::map<std::string, Tour> tours;        // keyed by map path (fov is fixed per spec)
  std::map<std::string, Checkpoint> checkpoints;
};

inline RunRecord run_cell(const CompareSpec& spec, const CompareAssets& assets,
                          const std::string& policy_spec, const std::string& map_path,
                          int n_agents, std::uint64_t seed) {
  RunRecord rec;
  rec.policy = policy_spec;
  rec.map = map_path;
  rec.n_test = n_agents;
  rec.seed = seed;
  rec.steps = spec.steps;
  try {
    const LoadedMap& loaded = assets.maps.at(map_path);
    Rng rng(seed);
    Rng start_rng = rng.split(1);
    Rng policy_rng = rng.split(2);

    PolicyContext ctx{loaded.map, spec.fov, spec.d_min, policy_rng};
    if (auto it = assets.tours.find(map_path); it != assets.tours.end()) ctx.tour = &it->second;
    if (policy_spec.rfind("net:", 0) == 0) {
      ctx.checkpoint = &assets.checkpoints.at(policy_spec.substr(4));
      rec.n_train = static_cast<int>(ctx.checkpoint->config.get_int("agents", -1));
    }
    std::unique_ptr<Policy> policy = build_policy(policy_spec, n_agents, std::move(ctx));

    std::vector<Cell> starts;
    if (auto forced = policy->initial_positions(n_agents)) starts = *forced;
    else starts = choose_starts(loaded.map, loaded.starts, n_agents, start_rng);

    WorldState world = make_world(loaded.map, spec.decay, spec.max_penalty, starts);
    rec.cumulative_penalty = run_episode(*policy, std::move(world), spec.steps, spec.fov)
                                 .cumulative_penalty;
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

}  // namespace detail

// Full factorial run over policies x maps x agent counts x seeds. Each cell
// owns its world and generators, so cells execute independently (in parallel
// when jobs > 1) and per-cell failures are recorded without aborting the
// grid. The run order in the report is fixed regardless of job count.
inline ExperimentReport compare(const CompareSpec& spec) {
  detail::CompareAssets assets;
  for (const std::string& path : spec.maps)
    if (!assets.maps.count(path)) assets.maps.emplace(path, load_map_file(path));

  bool wants_tspc = false;
  for (const std::string& p : spec.policies) {
    if (p == "tspc") wants_tspc = true;
    if (p.rfind("net:", 0) == 0 && !assets.checkpoints.count(p.substr(4)))
      assets.checkpoints.emplace(p.substr(4), load_checkpoint(p.substr(4)));
  }
  if (wants_tspc)
    for (const auto& [path, loaded] : assets.maps)
      assets.tours.emplace(path, tsp_tour(guard_points(loaded.map, spec.fov), loaded.map));

  struct Task {
    std::string policy, map;
    int agents;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const std::string& policy : spec.policies)
    for (const std::string& map : spec.maps)
      for (int agents : spec.agent_counts)
        for (std::uint64_t seed : spec.seeds) tasks.push_back({policy, map, agents, seed});

  ExperimentReport report;
  report.runs.resize(tasks.size());
  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      report.runs[i] = detail::run_cell(spec, assets, tasks[i].policy, tasks[i].map,
                                        tasks[i].agents, tasks[i].seed);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
        report.runs[i] = detail::run_cell(spec, assets, tasks[i].policy, tasks[i].map,
                                          tasks[i].agents, tasks[i].seed);
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

// Penalties are reported raw and in millions, matching the usual reporting
// convention for these magnitudes.
inline void write_csv(const ExperimentReport& report, std::ostream& out) {
  out << "policy,map,n_train,n_test,seed,steps,status,cumulative_penalty,cumulative_penalty_1e6\n";
  char buf[64];
  for (const RunRecord& r : report.runs) {
    out << r.policy << "," << r.map << ",";
    if (r.n_train >= 0) out << r.n_train;
    else out << "-";
    out << "," << r.n_test << "," << r.seed << "," << r.steps << ",";
    if (r.ok) {
      std::snprintf(buf, sizeof buf, "%.17g", r.cumulative_penalty);
      out << "ok," << buf << ",";
      std::snprintf(buf, sizeof buf, "%.6f", r.cumulative_penalty * 1e-6);
      out << buf << "\n";
    } else {
      out << "error:" << r.error << ",,\n";
    }
  }
}

inline void print_table(const ExperimentReport& report, std::ostream& out) {
  struct Agg {
    int n = 0;
    double sum = 0.0, sumsq = 0.0;
    int errors = 0;
  };
  std::map<std::string, Agg> groups;  // key printed as-is, map preserves order
  for (const RunRecord& r : report.runs) {
    char key[256];
    std::snprintf(key, sizeof key, "%-28s %-24s n=%d", r.policy.c_str(), r.map.c_str(),
                  r.n_test);
    Agg& a = groups[key];
    if (!r.ok) {
      ++a.errors;
      continue;
    }
    ++a.n;
    a.sum += r.cumulative_penalty;
    a.sumsq += r.cumulative_penalty * r.cumulative_penalty;
  }
  out << "policy                       map                      agents   mean_penalty"
         "      std        mean_1e6\n";
  for (const auto& [key, a] : groups) {
    if (a.n == 0) {
      out << key << "  all " << a.errors << " runs failed\n";
      continue;
    }
    const double mean = a.sum / a.n;
    const double var = std::max(0.0, a.sumsq / a.n - mean * mean);
    char line[160];
    std::snprintf(line, sizeof line, "%s  %14.1f %10.1f %12.4f", key.c_str(), mean,
                  std::sqrt(var), mean * 1e-6);
    out << line;
    if (a.errors > 0) out << "  (" << a.errors << " failed)";
    out << "\n";
  }
}

}  // namespace vpm
