#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpm/world.hpp"

namespace vpm {

struct TrajectoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One episode's worth of movement: T+1 position records bracketing T steps,
// with the action taken into each step and the shared reward it produced.
struct TrajectoryLog {
  std::string map_id;
  std::string policy_id;
  std::uint64_t seed = 0;
  int width = 0, height = 0;
  int n_agents = 0;
  int steps = 0;
  std::vector<std::vector<Cell>> positions;   // steps+1 entries of n_agents cells
  std::vector<std::vector<Action>> actions;   // steps entries
  std::vector<double> rewards;                // steps entries, non-positive

  double cumulative_penalty() const {
    double sum = 0.0;
    for (double r : rewards) sum += std::abs(r);
    return sum;
  }

  // Row coordinate of one agent over time (the vertical axis of the map).
  std::vector<double> row_series(int agent) const { return series(agent, true); }
  std::vector<double> col_series(int agent) const { return series(agent, false); }

  void write(std::ostream& out) const {
    out << "vpm-trajectory 1\n";
    out << "map " << (map_id.empty() ? "-" : map_id) << "\n";
    out << "policy " << (policy_id.empty() ? "-" : policy_id) << "\n";
    out << "seed " << seed << "\n";
    out << "width " << width << "\nheight " << height << "\n";
    out << "agents " << n_agents << "\nsteps " << steps << "\n";
    out << "pos 0";
    for (const Cell& c : positions[0]) out << " " << c.row << " " << c.col;
    out << "\n";
    char buf[40];
    for (int t = 0; t < steps; ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", rewards[t]);
      out << "step " << (t + 1) << " " << buf;
      for (int i = 0; i < n_agents; ++i)
        out << " " << static_cast<int>(actions[t][i]) << " " << positions[t + 1][i].row << " "
            << positions[t + 1][i].col;
      out << "\n";
    }
  }

  void write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw TrajectoryError("cannot write trajectory log: " + path);
    write(out);
  }

  static TrajectoryLog parse(std::istream& in) {
    TrajectoryLog log;
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "vpm-trajectory" || version != 1)
      throw TrajectoryError("not a trajectory log");
    auto expect = [&](const char* key) {
      if (!(in >> word) || word != key)
        throw TrajectoryError(std::string("trajectory log missing field: ") + key);
    };
    expect("map");
    in >> log.map_id;
    expect("policy");
    in >> log.policy_id;
    expect("seed");
    in >> log.seed;
    expect("width");
    in >> log.width;
    expect("height");
    in >> log.height;
    expect("agents");
    in >> log.n_agents;
    expect("steps");
    in >> log.steps;
    if (log.n_agents < 1 || log.steps < 0) throw TrajectoryError("bad trajectory header");

    expect("pos");
    int t0 = -1;
    in >> t0;
    std::vector<Cell> row(log.n_agents);
    for (auto& c : row) in >> c.row >> c.col;
    if (!in || t0 != 0) throw TrajectoryError("bad initial position record");
    log.positions.push_back(row);

    for (int t = 1; t <= log.steps; ++t) {
      expect("step");
      int ts = 0;
      double reward = 0.0;
      in >> ts >> reward;
      std::vector<Action> acts(log.n_agents);
      for (int i = 0; i < log.n_agents; ++i) {
        int a = 0;
        in >> a >> row[i].row >> row[i].col;
        if (a < 0 || a >= kActionCount) throw TrajectoryError("bad action code");
        acts[i] = static_cast<Action>(a);
      }
      if (!in || ts != t) throw TrajectoryError("bad step record at t=" + std::to_string(t));
      log.rewards.push_back(reward);
      log.actions.push_back(acts);
      log.positions.push_back(row);
    }
    return log;
  }

  static TrajectoryLog parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TrajectoryError("cannot open trajectory log: " + path);
    return parse(in);
  }

private:
  std::vector<double> series(int agent, bool rows) const {
    if (agent < 0 || agent >= n_agents)
      throw TrajectoryError("agent index out of range: " + std::to_string(agent));
    std::vector<double> out;
    out.reserve(positions.size());
    for (const auto& rec : positions)
      out.push_back(rows ? rec[agent].row : rec[agent].col);
    return out;
  }
};

}  // namespace vpm
