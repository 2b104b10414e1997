#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpm/visibility.hpp"
#include "vpm/world.hpp"

namespace vpm {

// Image codes shared by the local map and the mini-map. Free cells carry the
// penalty magnitude in [0, max_penalty]; the two codes overlap that range by
// construction of the encoding (a cell whose penalty magnitude happens to be
// exactly 150 is indistinguishable from an obstacle pixel).
inline constexpr double kObstacleCode = 150.0;
inline constexpr double kAgentCode = 200.0;
inline constexpr int kObsSize = 25;
inline constexpr int kObsCenter = kObsSize / 2;

using ObsImage = std::array<double, kObsSize * kObsSize>;

enum class ObsMode { Local, Mini, Both };

inline const char* obs_mode_name(ObsMode m) {
  switch (m) {
    case ObsMode::Local: return "local";
    case ObsMode::Mini: return "mini";
    case ObsMode::Both: return "both";
  }
  return "?";
}

inline ObsMode obs_mode_from_name(const std::string& s) {
  if (s == "local") return ObsMode::Local;
  if (s == "mini") return ObsMode::Mini;
  if (s == "both") return ObsMode::Both;
  throw std::invalid_argument("unknown observation mode: " + s +
                              " (expected local, mini or both)");
}

inline int obs_channels(ObsMode m) { return m == ObsMode::Both ? 2 : 1; }

// Ego-centric 25x25 view with the agent at the center pixel: what the
// agent's sensor returns. Out-of-map pixels and pixels occluded by an
// obstacle render as the obstacle code (occluded means unknown to the
// sensor); visible obstacles render as the obstacle code too; any visible
// cell occupied by an agent renders as the agent code; remaining visible
// free cells carry |penalty|.
inline ObsImage render_local(const WorldState& state, int agent_id) {
  if (agent_id < 0 || agent_id >= static_cast<int>(state.agents.size()))
    throw std::invalid_argument("render_local: invalid agent id " + std::to_string(agent_id));
  const Cell pos = state.agents[agent_id].pos;

  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(state.map.cell_count()), 0);
  for (const AgentState& a : state.agents) occupied[state.map.index(a.pos)] = 1;

  ObsImage out;
  for (int r = 0; r < kObsSize; ++r) {
    for (int c = 0; c < kObsSize; ++c) {
      const Cell world{pos.row + r - kObsCenter, pos.col + c - kObsCenter};
      double v = kObstacleCode;
      if (state.map.in_bounds(world) && line_of_sight(state.map, pos, world)) {
        if (state.map.at(world) == CellKind::Obstacle) v = kObstacleCode;
        else if (occupied[state.map.index(world)]) v = kAgentCode;
        else v = std::abs(state.penalties.value[state.map.index(world)]);
      }
      out[r * kObsSize + c] = v;
    }
  }
  out[kObsCenter * kObsSize + kObsCenter] = kAgentCode;
  return out;
}

// Low-resolution 25x25 summary of the whole map. Map dimensions must be
// integer multiples of 25. Each output pixel covers one block: obstacle code
// if the block contains any obstacle cell, else the agent code if it contains
// this agent (other agents are not drawn), else the worst |penalty| in the
// block.
inline ObsImage render_mini(const WorldState& state, int agent_id) {
  if (agent_id < 0 || agent_id >= static_cast<int>(state.agents.size()))
    throw std::invalid_argument("render_mini: invalid agent id " + std::to_string(agent_id));
  const GridMap& map = state.map;
  if (map.width() % kObsSize != 0 || map.height() % kObsSize != 0)
    throw std::invalid_argument("render_mini requires map dimensions divisible by " +
                                std::to_string(kObsSize) + ", got " +
                                std::to_string(map.width()) + "x" + std::to_string(map.height()));
  const int bh = map.height() / kObsSize;
  const int bw = map.width() / kObsSize;
  const Cell self = state.agents[agent_id].pos;

  ObsImage out;
  for (int r = 0; r < kObsSize; ++r) {
    for (int c = 0; c < kObsSize; ++c) {
      bool has_obstacle = false, has_self = false;
      double worst = 0.0;
      for (int dr = 0; dr < bh; ++dr) {
        for (int dc = 0; dc < bw; ++dc) {
          const Cell cell{r * bh + dr, c * bw + dc};
          if (map.at(cell) == CellKind::Obstacle) has_obstacle = true;
          else worst = std::max(worst, std::abs(state.penalties.value[map.index(cell)]));
          if (cell == self) has_self = true;
        }
      }
      out[r * kObsSize + c] = has_obstacle ? kObstacleCode : (has_self ? kAgentCode : worst);
    }
  }
  return out;
}

// Fixed normalization applied before images reach the network. Penalty
// magnitudes scale into [0, 0.5]; the two codes map to constants regardless
// of max_penalty. Checkpoints depend on this mapping, so it is frozen here
// and pinned by unit tests.
inline constexpr double kObstacleNorm = 0.375;
inline constexpr double kAgentNorm = 0.5;

inline double normalize_code(double raw, double max_penalty) {
  if (raw == kObstacleCode) return kObstacleNorm;
  if (raw == kAgentCode) return kAgentNorm;
  return 0.5 * (raw / max_penalty);
}

// Network input: the requested channels, normalized, channel-major
// (channel 0 = local map when present, channel 1 = mini-map).
struct Observation {
  ObsMode mode = ObsMode::Local;
  int channels = 1;
  std::vector<double> data;  // channels * 25 * 25
};

inline Observation make_observation(const WorldState& state, int agent_id, ObsMode mode) {
  Observation obs;
  obs.mode = mode;
  obs.channels = obs_channels(mode);
  obs.data.reserve(static_cast<std::size_t>(obs.channels) * kObsSize * kObsSize);
  const double rmax = state.penalties.max_penalty;
  if (mode == ObsMode::Local || mode == ObsMode::Both) {
    const ObsImage local = render_local(state, agent_id);
    for (double v : local) obs.data.push_back(normalize_code(v, rmax));
  }
  if (mode == ObsMode::Mini || mode == ObsMode::Both) {
    const ObsImage mini = render_mini(state, agent_id);
    for (double v : mini) obs.data.push_back(normalize_code(v, rmax));
  }
  return obs;
}

}  // namespace vpm
