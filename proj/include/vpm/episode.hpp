#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vpm/planners.hpp"
#include "vpm/trajectory.hpp"
#include "vpm/world.hpp"

namespace vpm {

struct EpisodeResult {
  TrajectoryLog log;
  double cumulative_penalty = 0.0;
};

// Steps the world T times under the given policy, accumulating |shared
// reward| and recording the full trajectory. Deterministic given the
// policy's and the world's construction seeds. The optional observer sees
// the state at each decision point (t = 0 .. steps-1), before the policy
// acts.
inline EpisodeResult run_episode(
    Policy& policy, WorldState world, int steps, int fov,
    const std::function<void(const WorldState&, int)>& observer = nullptr) {
  EpisodeResult out;
  TrajectoryLog& log = out.log;
  log.policy_id = policy.name();
  log.width = world.map.width();
  log.height = world.map.height();
  log.n_agents = static_cast<int>(world.agents.size());
  log.steps = steps;

  std::vector<Cell> pos(world.agents.size());
  for (std::size_t i = 0; i < world.agents.size(); ++i) pos[i] = world.agents[i].pos;
  log.positions.push_back(pos);

  for (int t = 0; t < steps; ++t) {
    if (observer) observer(world, t);
    const std::vector<Action> joint = policy.act(world);
    if (joint.size() != world.agents.size())
      throw std::invalid_argument("policy emitted " + std::to_string(joint.size()) +
                                  " actions for " + std::to_string(world.agents.size()) +
                                  " agents");
    const double reward = step(world, joint, fov);
    out.cumulative_penalty += std::abs(reward);
    for (std::size_t i = 0; i < world.agents.size(); ++i) pos[i] = world.agents[i].pos;
    log.positions.push_back(pos);
    log.actions.push_back(joint);
    log.rewards.push_back(reward);
  }
  return out;
}

}  // namespace vpm
