#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/oracles.hpp"
#include "vpm/analysis.hpp"
#include "vpm/checkpoint.hpp"
#include "vpm/compare.hpp"
#include "vpm/config.hpp"
#include "vpm/episode.hpp"
#include "vpm/image.hpp"

using namespace vpm;

namespace {
class StationaryPolicy : public Policy {
public:
  std::vector<Action> act(const WorldState& state) override {
    return std::vector<Action>(state.agents.size(), Action::Stay);
  }
  std::string name() const override { return "stationary"; }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("run_episode with zero steps records only the initial positions") {
  StationaryPolicy policy;
  WorldState w = make_world(GridMap(10, 10), 1.0, 400.0, {{5, 5}});
  const EpisodeResult r = run_episode(policy, std::move(w), 0, 5);
  REQUIRE(r.cumulative_penalty == 0.0);
  REQUIRE(r.log.positions.size() == 1);
  REQUIRE(r.log.actions.empty());
  REQUIRE(r.log.rewards.empty());
}

TEST_CASE("stationary agent matches the closed-form penalty accumulation") {
  // Full-window agent on an open 50x50 map: 625 cells stay visible, the
  // other 1875 decay by 1 per step and clamp at 400. Cumulative |penalty|
  // after T steps is 1875 * sum_t min(t, 400).
  const int T = 500;
  StationaryPolicy policy;
  WorldState w = make_world(GridMap(50, 50), 1.0, 400.0, {{24, 24}});
  const EpisodeResult r = run_episode(policy, std::move(w), T, 25);

  double closed_form = 0.0;
  for (int t = 1; t <= T; ++t) closed_form += 1875.0 * std::min<double>(t, 400.0);
  REQUIRE(r.cumulative_penalty == closed_form);

  double from_log = 0.0;
  for (double reward : r.log.rewards) {
    REQUIRE(reward <= 0.0);
    from_log += std::abs(reward);
  }
  REQUIRE(from_log == r.cumulative_penalty);  // internal consistency
}

TEST_CASE("run_episode rejects a policy with the wrong arity") {
  class TwoActionPolicy : public Policy {
  public:
    std::vector<Action> act(const WorldState&) override {
      return {Action::Stay, Action::Stay};
    }
    std::string name() const override { return "two"; }
  };
  TwoActionPolicy policy;
  WorldState w = make_world(GridMap(5, 5), 1.0, 400.0, {{2, 2}});
  REQUIRE_THROWS_AS(run_episode(policy, std::move(w), 3, 5), std::invalid_argument);
}

TEST_CASE("trajectory logs survive a write/parse round trip") {
  Rng rng(3);
  RandomPolicy policy(Rng(17));
  WorldState w = make_world(GridMap(9, 9), 1.0, 400.0, {{0, 0}, {8, 8}});
  EpisodeResult r = run_episode(policy, std::move(w), 25, 5);
  r.log.map_id = "maps/fake.map";
  r.log.seed = 17;

  std::ostringstream out;
  r.log.write(out);
  std::istringstream in(out.str());
  const TrajectoryLog parsed = TrajectoryLog::parse(in);
  REQUIRE(parsed.positions == r.log.positions);
  REQUIRE(parsed.actions == r.log.actions);
  REQUIRE(parsed.rewards == r.log.rewards);
  REQUIRE(parsed.map_id == r.log.map_id);
  REQUIRE(parsed.seed == 17);
  REQUIRE(parsed.cumulative_penalty() == r.log.cumulative_penalty());

  std::istringstream junk("not a log");
  REQUIRE_THROWS_AS(TrajectoryLog::parse(junk), TrajectoryError);
}

TEST_CASE("detect_period finds synthetic periods and refuses degenerate input") {
  std::vector<double> sine(200);
  for (int t = 0; t < 200; ++t) sine[t] = std::sin(2.0 * M_PI * t / 20.0);
  const auto p = detect_period(sine);
  REQUIRE(p.has_value());
  REQUIRE(std::abs(*p - 20) <= 1);

  std::vector<double> square(120);
  for (int t = 0; t < 120; ++t) square[t] = (t % 8) < 4 ? 1.0 : -1.0;
  REQUIRE(detect_period(square) == 8);  // noise-free recovery is exact

  const std::vector<double> constant(50, 3.0);
  REQUIRE_FALSE(detect_period(constant).has_value());

  Rng rng(4);
  std::vector<double> noise(300);
  for (auto& x : noise) x = rng.uniform(-1.0, 1.0);
  REQUIRE_FALSE(detect_period(noise).has_value());

  const std::vector<double> tiny{1.0, 2.0, 3.0};
  REQUIRE_THROWS_AS(detect_period(tiny), std::invalid_argument);
}

TEST_CASE("phase_difference recovers circular shifts") {
  const int period = 20;
  std::vector<double> base(period);
  for (int k = 0; k < period; ++k)
    base[k] = std::sin(2.0 * M_PI * k / period) + 0.3 * std::sin(4.0 * M_PI * k / period);
  auto shifted = [&](int lag, int n) {
    std::vector<double> s(n);
    for (int t = 0; t < n; ++t) s[t] = base[((t - lag) % period + period) % period];
    return s;
  };
  const std::vector<double> a = shifted(0, 100);
  REQUIRE(phase_difference(a, shifted(5, 100), period) == 5);
  REQUIRE(phase_difference(a, a, period) == 0);
  REQUIRE(phase_difference(a, shifted(period, 100), period) == 0);
  REQUIRE_THROWS_AS(phase_difference(a, a, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(phase_difference(a, shifted(0, 30), period), std::invalid_argument);
  const std::vector<double> b = shifted(0, 30);
  REQUIRE_THROWS_AS(phase_difference(b, b, period), std::invalid_argument);
}

TEST_CASE("polar_series handles loops, stationary agents and the exact center") {
  TrajectoryLog log;
  log.width = 5;
  log.height = 5;
  log.n_agents = 1;

  SECTION("square loop is periodic with the loop length") {
    const std::vector<Cell> loop{{1, 1}, {1, 2}, {1, 3}, {2, 3},
                                 {3, 3}, {3, 2}, {3, 1}, {2, 1}};
    for (int rep = 0; rep < 6; ++rep)
      for (const Cell& c : loop) log.positions.push_back({c});
    log.steps = static_cast<int>(log.positions.size()) - 1;
    const std::vector<double> s = polar_series(log, 0);
    const auto p = detect_period(s);
    REQUIRE(p.has_value());
    REQUIRE(*p == 8);
  }

  SECTION("stationary agent gives a constant series") {
    for (int t = 0; t < 10; ++t) log.positions.push_back({Cell{1, 1}});
    log.steps = 9;
    const std::vector<double> s = polar_series(log, 0);
    for (double v : s) REQUIRE(v == s[0]);
  }

  SECTION("center start defines theta = 0 until the agent moves east") {
    log.positions.push_back({Cell{2, 2}});  // exact center of a 5x5 map
    log.positions.push_back({Cell{2, 3}});
    log.positions.push_back({Cell{1, 3}});
    log.steps = 2;
    const std::vector<double> s = polar_series(log, 0);
    REQUIRE(s[0] == 0.0);
    REQUIRE(s[1] == 0.0);  // due east
    REQUIRE(s[2] < 0.0);   // above the horizontal axis: negative row offset
  }
}

TEST_CASE("trail images are deterministic and mark everything") {
  RandomPolicy policy(Rng(5));
  const LoadedMap m = load_map_file("maps/tworooms.map");
  WorldState w = make_world(m.map, 1.0, 400.0, {{5, 3}, {5, 15}});
  EpisodeResult r = run_episode(policy, std::move(w), 60, 5);

  namespace fs = std::filesystem;
  const std::string p1 = (fs::temp_directory_path() / "vpm_trail_a.ppm").string();
  const std::string p2 = (fs::temp_directory_path() / "vpm_trail_b.ppm").string();
  emit_trail(r.log, m.map, p1);
  emit_trail(r.log, m.map, p2);
  const std::string bytes = slurp(p1);
  REQUIRE(bytes == slurp(p2));
  REQUIRE(bytes.substr(0, 2) == "P6");

  // a no-movement log still gets its final-position markers
  StationaryPolicy stay;
  WorldState w2 = make_world(m.map, 1.0, 400.0, {{5, 3}});
  EpisodeResult r2 = run_episode(stay, std::move(w2), 3, 5);
  emit_trail(r2.log, m.map, p1);
  REQUIRE_FALSE(slurp(p1).empty());
}

TEST_CASE("kv config parsing, defaults and canonical hashing") {
  const KvConfig cfg = KvConfig::parse_text(
      "# comment\n"
      "steps = 100\n"
      "lr = 3e-4   # trailing comment\n"
      "maps = a.map, b.map\n"
      "name = open\n");
  REQUIRE(cfg.get_int("steps", 0) == 100);
  REQUIRE(cfg.get_double("lr", 0.0) == 3e-4);
  REQUIRE(cfg.get_int("missing", 7) == 7);
  REQUIRE(cfg.get_list("maps") == std::vector<std::string>{"a.map", "b.map"});
  REQUIRE(cfg.require_str("name") == "open");
  REQUIRE_THROWS_AS(cfg.require_str("absent"), ConfigError);
  REQUIRE_THROWS_AS(KvConfig::parse_text("no equals sign\n"), ConfigError);
  REQUIRE_THROWS_AS(cfg.get_int("name", 0), ConfigError);

  const KvConfig reordered = KvConfig::parse_text(
      "name = open\nmaps = a.map, b.map\nlr = 3e-4\nsteps = 100\n");
  REQUIRE(cfg.canonical() == reordered.canonical());
  REQUIRE(cfg.hash() == reordered.hash());
}

TEST_CASE("checkpoints round-trip bit-exactly and verify their hash") {
  namespace fs = std::filesystem;
  NetConfig net_cfg;
  net_cfg.channels = 1;
  net_cfg.feature_dim = 8;
  net_cfg.heads = 2;
  net_cfg.head_hidden = 6;
  Rng rng(6);
  PolicyNet net = make_policy_net(net_cfg, rng);

  KvConfig kv = KvConfig::parse_text(
      "obs_mode = local\nfeature_dim = 8\nheads = 2\nhead_hidden = 6\nagents = 2\nseed = 5\n");
  const std::string path = (fs::temp_directory_path() / "vpm_ckpt_test.txt").string();
  save_checkpoint(path, net, kv);

  Checkpoint loaded = load_checkpoint(path);
  auto a = net.named_params();
  auto b = loaded.net.named_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].first == b[i].first);
    REQUIRE(a[i].second->value.v == b[i].second->value.v);  // bit-exact
  }
  REQUIRE(loaded.config.get_int("agents", -1) == 2);

  // tampering with the stored config breaks the hash check
  std::string text = slurp(path);
  const auto pos = text.find("agents = 2");
  text.replace(pos, 10, "agents = 3");
  std::ofstream(path) << text;
  REQUIRE_THROWS_AS(load_checkpoint(path), CheckpointError);

  REQUIRE_THROWS_AS(load_checkpoint("/nonexistent/vpm.ckpt"), CheckpointError);
}

TEST_CASE("compare runs the grid deterministically and tolerates cell failures") {
  CompareSpec spec;
  spec.maps = {"maps/open10.map"};
  spec.policies = {"random", "gcs"};
  spec.agent_counts = {2};
  spec.seeds = {0, 1, 2};
  spec.steps = 60;
  spec.fov = 5;
  spec.d_min = 3.0;

  const ExperimentReport r1 = compare(spec);
  const ExperimentReport r2 = compare(spec);
  std::ostringstream csv1, csv2;
  write_csv(r1, csv1);
  write_csv(r2, csv2);
  REQUIRE(csv1.str() == csv2.str());
  REQUIRE(r1.runs.size() == 6);

  double random_mean = 0.0, gcs_mean = 0.0;
  for (const RunRecord& rec : r1.runs) {
    REQUIRE(rec.ok);
    REQUIRE(rec.n_train == -1);
    (rec.policy == "random" ? random_mean : gcs_mean) += rec.cumulative_penalty;
  }
  REQUIRE(gcs_mean < random_mean);

  std::ostringstream table;
  print_table(r1, table);
  REQUIRE(table.str().find("random") != std::string::npos);

  // a policy that cannot run on this map fails its cells, not the grid
  CompareSpec bad = spec;
  bad.policies = {"net:/nonexistent.ckpt"};
  REQUIRE_THROWS_AS(compare(bad), CheckpointError);  // missing asset is fatal

  CompareSpec mixed = spec;
  mixed.agent_counts = {0};  // zero agents cannot step
  const ExperimentReport r3 = compare(mixed);
  for (const RunRecord& rec : r3.runs) {
    REQUIRE_FALSE(rec.ok);
    REQUIRE_FALSE(rec.error.empty());
  }
}

TEST_CASE("build_policy rejects unknown specs") {
  const GridMap map(5, 5);
  PolicyContext ctx{map, 5, 3.0, Rng(1)};
  REQUIRE_THROWS_AS(build_policy("magic", 1, std::move(ctx)), std::invalid_argument);
}

TEST_CASE("parallel compare produces the same report as sequential") {
  CompareSpec spec;
  spec.maps = {"maps/open10.map"};
  spec.policies = {"random", "tspc"};
  spec.agent_counts = {1, 2};
  spec.seeds = {0, 1};
  spec.steps = 40;
  spec.fov = 5;

  CompareSpec par = spec;
  par.jobs = 3;
  std::ostringstream a, b;
  write_csv(compare(spec), a);
  write_csv(compare(par), b);
  REQUIRE(a.str() == b.str());
}
