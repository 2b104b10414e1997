// Command-line frontend: single episodes, training, the comparison grid,
// trajectory analysis and map inspection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vpm/vpm.hpp"

namespace fs = std::filesystem;

namespace {

vpm::TrainConfig train_config_from_kv(const vpm::KvConfig& kv) {
  vpm::TrainConfig cfg;
  cfg.n_agents = static_cast<int>(kv.get_int("agents", 1));
  cfg.episodes = static_cast<int>(kv.get_int("episodes", 500));
  cfg.steps = static_cast<int>(kv.get_int("steps", 100));
  cfg.fov = static_cast<int>(kv.get_int("fov", 25));
  cfg.decay = kv.get_double("decay", 1.0);
  cfg.max_penalty = kv.get_double("r_max", 400.0);
  cfg.obs_mode = vpm::obs_mode_from_name(kv.get_str("obs_mode", "both"));
  cfg.seed = kv.get_u64("seed", 0);
  cfg.episodes_per_update = static_cast<int>(kv.get_int("episodes_per_update", 1));
  cfg.bootstrap_tail = kv.get_int("bootstrap", 1) != 0;
  cfg.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", 100));
  cfg.ppo.gamma = kv.get_double("gamma", 0.99);
  cfg.ppo.clip_eps = kv.get_double("clip_eps", 0.2);
  cfg.ppo.lr = kv.get_double("lr", 3e-4);
  cfg.ppo.c_value = kv.get_double("c_value", 0.5);
  cfg.ppo.c_entropy = kv.get_double("c_entropy", 0.01);
  cfg.ppo.epochs = static_cast<int>(kv.get_int("ppo_epochs", 4));
  cfg.ppo.minibatch = static_cast<int>(kv.get_int("minibatch", 256));
  cfg.ppo.adv_norm = kv.get_int("adv_norm", 1) != 0;
  return cfg;
}

vpm::NetConfig net_config_from_kv(const vpm::KvConfig& kv) {
  vpm::NetConfig net;
  net.channels = vpm::obs_channels(vpm::obs_mode_from_name(kv.get_str("obs_mode", "both")));
  net.feature_dim = static_cast<int>(kv.get_int("feature_dim", 128));
  net.heads = static_cast<int>(kv.get_int("heads", 3));
  net.head_hidden = static_cast<int>(kv.get_int("head_hidden", 64));
  return net;
}

int cmd_run(const std::string& map_path, const std::string& policy_spec, int agents, int steps,
            std::uint64_t seed, int fov, double dmin, double decay, double rmax,
            const std::string& out, const std::string& trail, const std::string& dump_dir) {
  const vpm::LoadedMap loaded = vpm::load_map_file(map_path);
  vpm::Rng rng(seed);
  vpm::Rng start_rng = rng.split(1);
  vpm::Rng policy_rng = rng.split(2);

  vpm::ObsMode dump_mode = vpm::ObsMode::Local;
  vpm::PolicyContext ctx{loaded.map, fov, dmin, policy_rng};
  std::unique_ptr<vpm::Policy> policy = vpm::build_policy(policy_spec, agents, std::move(ctx));

  std::vector<vpm::Cell> starts;
  if (auto forced = policy->initial_positions(agents)) starts = *forced;
  else starts = vpm::choose_starts(loaded.map, loaded.starts, agents, start_rng);

  std::function<void(const vpm::WorldState&, int)> observer;
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    const bool mini_ok =
        loaded.map.width() % vpm::kObsSize == 0 && loaded.map.height() % vpm::kObsSize == 0;
    observer = [dump_dir, mini_ok](const vpm::WorldState& w, int t) {
      char name[128];
      for (std::size_t i = 0; i < w.agents.size(); ++i) {
        std::snprintf(name, sizeof name, "%s/step%05d_agent%zu_local.pgm", dump_dir.c_str(), t,
                      i);
        vpm::dump_observation_pgm(name, vpm::render_local(w, static_cast<int>(i)),
                                  w.penalties.max_penalty);
        if (mini_ok) {
          std::snprintf(name, sizeof name, "%s/step%05d_agent%zu_mini.pgm", dump_dir.c_str(), t,
                        i);
          vpm::dump_observation_pgm(name, vpm::render_mini(w, static_cast<int>(i)),
                                    w.penalties.max_penalty);
        }
      }
    };
  }
  (void)dump_mode;

  vpm::WorldState world = vpm::make_world(loaded.map, decay, rmax, starts);
  vpm::EpisodeResult result = vpm::run_episode(*policy, std::move(world), steps, fov, observer);
  result.log.map_id = map_path;
  result.log.seed = seed;

  std::printf("policy=%s map=%s agents=%d steps=%d seed=%llu\n", policy_spec.c_str(),
              map_path.c_str(), agents, steps, static_cast<unsigned long long>(seed));
  std::printf("cumulative_penalty=%.1f (%.4f x 1e6)\n", result.cumulative_penalty,
              result.cumulative_penalty * 1e-6);
  if (!out.empty()) {
    result.log.write_file(out);
    std::printf("trajectory written to %s\n", out.c_str());
  }
  if (!trail.empty()) {
    vpm::emit_trail(result.log, loaded.map, trail);
    std::printf("trail image written to %s\n", trail.c_str());
  }
  return 0;
}

int cmd_train(const std::string& config_path) {
  const vpm::KvConfig kv = vpm::KvConfig::parse_file(config_path);
  const vpm::TrainConfig cfg = train_config_from_kv(kv);
  const vpm::NetConfig net_cfg = net_config_from_kv(kv);
  const std::string map_path = kv.require_str("map");
  const std::string out_dir = kv.get_str("out_dir", "train_out");
  const vpm::LoadedMap loaded = vpm::load_map_file(map_path);

  fs::create_directories(out_dir);
  std::ofstream log_csv(out_dir + "/train_log.csv");
  log_csv << "episode,cumulative_penalty,loss,entropy\n";

  vpm::Rng init_rng(cfg.seed, 99);
  vpm::PolicyNet net = vpm::make_policy_net(net_cfg, init_rng);
  std::printf("training: %d agents, %d episodes x %d steps on %s (%zu parameters)\n",
              cfg.n_agents, cfg.episodes, cfg.steps, map_path.c_str(), net.parameter_count());

  char buf[160];
  auto on_episode = [&](const vpm::EpisodeStat& s) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", s.episode, s.cumulative_penalty,
                  s.loss, s.entropy);
    log_csv << buf;
    if (s.episode % 50 == 0)
      std::printf("episode %5d  penalty %12.1f  loss %9.4f  entropy %6.4f\n", s.episode,
                  s.cumulative_penalty, s.loss, s.entropy);
  };
  auto on_checkpoint = [&](int episode, vpm::PolicyNet& n) {
    std::snprintf(buf, sizeof buf, "%s/checkpoint_ep%06d.ckpt", out_dir.c_str(), episode);
    vpm::save_checkpoint(buf, n, kv);
  };

  const vpm::TrainResult result =
      vpm::train(net, loaded.map, loaded.starts, cfg, on_episode, on_checkpoint);
  vpm::save_checkpoint(out_dir + "/policy.ckpt", net, kv);
  if (result.diverged) {
    std::fprintf(stderr,
                 "training halted: non-finite loss after episode %d; "
                 "last good parameters saved to %s/policy.ckpt\n",
                 result.episodes_done, out_dir.c_str());
    return 1;
  }
  std::printf("done; final checkpoint: %s/policy.ckpt, log: %s/train_log.csv\n", out_dir.c_str(),
              out_dir.c_str());
  return 0;
}

int cmd_compare(const std::string& config_path, std::string out_csv) {
  const vpm::KvConfig kv = vpm::KvConfig::parse_file(config_path);
  vpm::CompareSpec spec;
  spec.maps = kv.get_list("maps");
  spec.policies = kv.get_list("policies");
  for (const std::string& a : kv.get_list("agents")) spec.agent_counts.push_back(std::stoi(a));
  const int n_seeds = static_cast<int>(kv.get_int("seeds", 10));
  const std::uint64_t seed_base = kv.get_u64("seed_base", 0);
  for (int i = 0; i < n_seeds; ++i) spec.seeds.push_back(seed_base + i);
  spec.steps = static_cast<int>(kv.get_int("steps", 500));
  spec.fov = static_cast<int>(kv.get_int("fov", 25));
  spec.decay = kv.get_double("decay", 1.0);
  spec.max_penalty = kv.get_double("r_max", 400.0);
  spec.d_min = kv.get_double("d_min", 12.0);
  spec.jobs = static_cast<int>(kv.get_int("jobs", 1));
  if (spec.maps.empty() || spec.policies.empty() || spec.agent_counts.empty())
    throw vpm::ConfigError("compare config needs maps, policies and agents lists");
  if (out_csv.empty()) out_csv = kv.get_str("out_csv", "compare.csv");

  const vpm::ExperimentReport report = vpm::compare(spec);
  std::ofstream csv(out_csv);
  vpm::write_csv(report, csv);
  vpm::print_table(report, std::cout);
  std::printf("csv written to %s\n", out_csv.c_str());
  return 0;
}

int cmd_analyze(const std::string& log_path, const std::string& map_path, bool period,
                bool phase, bool polar, int agent, int agent_b, const std::string& coord,
                std::optional<int> period_hint, const std::string& trail,
                const std::string& out) {
  const vpm::TrajectoryLog log = vpm::TrajectoryLog::parse_file(log_path);
  auto series_of = [&](int a) {
    return coord == "col" ? log.col_series(a) : log.row_series(a);
  };

  if (period) {
    const auto p = vpm::detect_period(series_of(agent));
    if (p) std::printf("period agent=%d coord=%s %d\n", agent, coord.c_str(), *p);
    else std::printf("period agent=%d coord=%s none\n", agent, coord.c_str());
  }
  if (phase) {
    const std::vector<double> a = series_of(agent);
    const std::vector<double> b = series_of(agent_b);
    int p = 0;
    if (period_hint) {
      p = *period_hint;
    } else {
      const auto detected = vpm::detect_period(a);
      if (!detected) {
        std::printf("phase agents=%d,%d none (no period detected; pass --period-hint)\n", agent,
                    agent_b);
        return 0;
      }
      p = *detected;
    }
    std::printf("phase agents=%d,%d period=%d offset=%d\n", agent, agent_b, p,
                vpm::phase_difference(a, b, p));
  }
  if (polar) {
    const std::vector<double> s = vpm::polar_series(log, agent);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out.empty()) {
      file.open(out);
      os = &file;
    }
    *os << "t,sin_theta\n";
    char buf[48];
    for (std::size_t t = 0; t < s.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%.10g\n", t, s[t]);
      *os << buf;
    }
  }
  if (!trail.empty()) {
    const std::string actual_map = map_path.empty() ? log.map_id : map_path;
    if (actual_map.empty() || actual_map == "-")
      throw vpm::TrajectoryError("trail rendering needs --map (log has no map path)");
    vpm::emit_trail(log, vpm::load_map_file(actual_map).map, trail);
    std::printf("trail image written to %s\n", trail.c_str());
  }
  return 0;
}

int cmd_map_info(const std::string& map_path, std::optional<int> fov) {
  const vpm::LoadedMap loaded = vpm::load_map_file(map_path);
  const vpm::GridMap& map = loaded.map;
  std::printf("map %s: %dx%d (width x height), %d free, %d obstacle, %zu declared starts\n",
              map_path.c_str(), map.width(), map.height(), map.free_count(),
              map.cell_count() - map.free_count(), loaded.starts.size());
  for (const vpm::Cell& c : loaded.starts) std::printf("  start (%d, %d)\n", c.row, c.col);
  if (fov) {
    const std::vector<vpm::Cell> guards = vpm::guard_points(map, *fov);
    std::printf("guard points for fov %d: %zu\n", *fov, guards.size());
    for (const vpm::Cell& c : guards) std::printf("  guard (%d, %d)\n", c.row, c.col);
    const vpm::Tour tour = vpm::tsp_tour(guards, map);
    std::printf("cyclic tour length: %d steps\n", tour.total_steps());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visibility-based persistent monitoring: simulator, baselines and learner"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run one episode and log the trajectory");
  std::string map_path, policy = "random", out, trail, dump_dir;
  int agents = 2, steps = 500, fov = 25;
  std::uint64_t seed = 0;
  double dmin = 12.0, decay = 1.0, rmax = 400.0;
  run->add_option("--map", map_path, "map file")->required();
  run->add_option("--policy", policy, "random | gcs | tspc | net:<checkpoint>");
  run->add_option("--agents", agents, "number of agents");
  run->add_option("--steps", steps, "episode length");
  run->add_option("--seed", seed, "rng seed");
  run->add_option("--fov", fov, "field-of-view side length (odd)");
  run->add_option("--dmin", dmin, "suppression distance for gcs");
  run->add_option("--decay", decay, "penalty decay per unobserved step");
  run->add_option("--rmax", rmax, "penalty clamp");
  run->add_option("--out", out, "trajectory log output path");
  run->add_option("--trail", trail, "write a trail image (ppm)");
  run->add_option("--dump-obs", dump_dir, "dump per-step observations (pgm) to this directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the policy network");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "training config file")->required();

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "factorial policy comparison grid");
  std::string compare_config, out_csv;
  compare_cmd->add_option("--config", compare_config, "comparison config file")->required();
  compare_cmd->add_option("--out-csv", out_csv, "csv output path (overrides config)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "trajectory log analysis");
  std::string log_path, a_map, coord = "row", a_trail, a_out;
  bool period = false, phase = false, polar = false;
  int agent = 0, agent_b = 1;
  int period_hint = -1;
  analyze->add_option("--log", log_path, "trajectory log file")->required();
  analyze->add_option("--map", a_map, "map file (for --trail, overrides the log header)");
  analyze->add_flag("--period", period, "detect the dominant period of an agent's coordinate");
  analyze->add_flag("--phase", phase, "phase offset between two agents");
  analyze->add_flag("--polar", polar, "sin(theta) series about the map center");
  analyze->add_option("--agent", agent, "agent index");
  analyze->add_option("--agent-b", agent_b, "second agent index for --phase");
  analyze->add_option("--coord", coord, "row or col (default row)");
  analyze->add_option("--period-hint", period_hint, "period to use for --phase");
  analyze->add_option("--trail", a_trail, "write a trail image (ppm)");
  analyze->add_option("--out", a_out, "output file for --polar (default stdout)");

  // map-info
  auto* info = app.add_subcommand("map-info", "map statistics and guard points");
  std::string info_map;
  int info_fov = -1;
  info->add_option("--map", info_map, "map file")->required();
  info->add_option("--fov", info_fov, "also compute guard points for this field of view");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(map_path, policy, agents, steps, seed, fov, dmin, decay, rmax, out, trail,
                     dump_dir);
    if (train_cmd->parsed()) return cmd_train(train_config);
    if (compare_cmd->parsed()) return cmd_compare(compare_config, out_csv);
    if (analyze->parsed())
      return cmd_analyze(log_path, a_map, period, phase, polar, agent, agent_b, coord,
                         period_hint >= 0 ? std::optional<int>(period_hint) : std::nullopt,
                         a_trail, a_out);
    if (info->parsed())
      return cmd_map_info(info_map, info_fov >= 1 ? std::optional<int>(info_fov) : std::nullopt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
