#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpm/grid.hpp"
#include "vpm/rng.hpp"
#include "vpm/visibility.hpp"

namespace vpm {

enum class Action : std::uint8_t { Up, Down, Left, Right, Stay };
inline constexpr int kActionCount = 5;

inline Cell action_delta(Action a) {
  switch (a) {
    case Action::Up: return {-1, 0};
    case Action::Down: return {1, 0};
    case Action::Left: return {0, -1};
    case Action::Right: return {0, 1};
    case Action::Stay: return {0, 0};
  }
  return {0, 0};
}

// Unit step from `from` to `to`; the two cells must be identical or
// 4-adjacent.
inline Action action_towards(Cell from, Cell to) {
  const int dr = to.row - from.row, dc = to.col - from.col;
  if (dr == 0 && dc == 0) return Action::Stay;
  if (dr == -1 && dc == 0) return Action::Up;
  if (dr == 1 && dc == 0) return Action::Down;
  if (dr == 0 && dc == -1) return Action::Left;
  if (dr == 0 && dc == 1) return Action::Right;
  throw std::invalid_argument("action_towards: cells are not 4-adjacent");
}

inline const char* action_name(Action a) {
  switch (a) {
    case Action::Up: return "Up";
    case Action::Down: return "Down";
    case Action::Left: return "Left";
    case Action::Right: return "Right";
    case Action::Stay: return "Stay";
  }
  return "?";
}

// Per-cell reward value in [-max_penalty, 0]. A cell left unobserved decays
// by `decay` each step until the clamp; an observed cell resets to zero.
// Obstacle cells carry no value and are excluded from sums.
struct PenaltyField {
  double decay = 1.0;        // penalty units per unobserved step
  double max_penalty = 400.0;
  std::vector<double> value;  // indexed like GridMap cells; obstacle entries stay 0

  PenaltyField() = default;
  PenaltyField(const GridMap& map, double decay_rate, double max_pen)
      : decay(decay_rate), max_penalty(max_pen),
        value(static_cast<std::size_t>(map.cell_count()), 0.0) {
    if (decay < 0.0) throw std::invalid_argument("decay rate must be non-negative");
    if (max_penalty <= 0.0) throw std::invalid_argument("max penalty must be positive");
  }
};

struct AgentState {
  Cell pos;
  int id = 0;
};

// The full Markov state: map, per-cell values, agent positions, timestep.
struct WorldState {
  GridMap map;
  PenaltyField penalties;
  std::vector<AgentState> agents;
  long t = 0;
};

// Moves one cell in direction `a`; off-map or obstacle targets leave the
// agent in place. Agents may overlap, so no agent-agent check is needed.
inline AgentState apply_action(AgentState agent, Action a, const GridMap& map) {
  const Cell d = action_delta(a);
  const Cell target{agent.pos.row + d.row, agent.pos.col + d.col};
  if (map.is_free(target)) agent.pos = target;
  return agent;
}

// One decay/reset sweep over the free cells under the given joint mask.
inline void update_penalties(PenaltyField& field, const GridMap& map,
                             const VisibilityMask& mask) {
  if (!mask.same_shape(map.width(), map.height()))
    throw std::invalid_argument("visibility mask shape does not match map");
  for (int i = 0; i < map.cell_count(); ++i) {
    const Cell c = map.cell(i);
    if (map.at(c) != CellKind::Free) continue;
    if (mask.at(c)) {
      field.value[i] = 0.0;
    } else {
      field.value[i] = std::max(field.value[i] - field.decay, -field.max_penalty);
    }
  }
}

// Sum of values over all free cells; always in [-free_count*max_penalty, 0].
inline double shared_reward(const PenaltyField& field, const GridMap& map) {
  double sum = 0.0;
  for (int i = 0; i < map.cell_count(); ++i)
    if (map.at(map.cell(i)) == CellKind::Free) sum += field.value[i];
  return sum;
}

// Applies all actions simultaneously (order-independent: overlap is allowed
// and each move depends only on the static map), computes the joint field of
// view at the new positions, updates the penalty field and the timestep, and
// returns the shared reward of the updated field.
inline double step(WorldState& state, std::span<const Action> joint_action, int fov) {
  if (joint_action.size() != state.agents.size())
    throw std::invalid_argument("joint action size " + std::to_string(joint_action.size()) +
                                " does not match agent count " +
                                std::to_string(state.agents.size()));
  if (state.agents.empty()) throw std::invalid_argument("step requires at least one agent");

  std::vector<Cell> positions(state.agents.size());
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    state.agents[i] = apply_action(state.agents[i], joint_action[i], state.map);
    positions[i] = state.agents[i].pos;
  }
  const VisibilityMask mask = joint_visibility(state.map, positions, fov);
  update_penalties(state.penalties, state.map, mask);
  ++state.t;
  return shared_reward(state.penalties, state.map);
}

// Start cells for n agents: declared map starts first (row-major order),
// remaining agents drawn uniformly over the free cells. Overlap is fine.
inline std::vector<Cell> choose_starts(const GridMap& map, std::span<const Cell> declared,
                                       int n_agents, Rng& rng) {
  std::vector<Cell> out;
  out.reserve(n_agents);
  for (Cell c : declared) {
    if (static_cast<int>(out.size()) == n_agents) break;
    if (!map.is_free(c)) throw std::invalid_argument("declared start is not a free cell");
    out.push_back(c);
  }
  if (static_cast<int>(out.size()) < n_agents) {
    const std::vector<Cell> free = map.free_cells();
    while (static_cast<int>(out.size()) < n_agents) out.push_back(free[rng.index(free.size())]);
  }
  return out;
}

inline WorldState make_world(GridMap map, double decay, double max_penalty,
                             std::vector<Cell> starts) {
  WorldState s{std::move(map), PenaltyField{}, {}, 0};
  s.penalties = PenaltyField(s.map, decay, max_penalty);
  s.agents.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!s.map.is_free(starts[i]))
      throw std::invalid_argument("agent start must be a free cell inside the map");
    s.agents.push_back({starts[i], static_cast<int>(i)});
  }
  return s;
}

}  // namespace vpm
