#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vpm/pathfind.hpp"
#include "vpm/rng.hpp"
#include "vpm/visibility.hpp"
#include "vpm/world.hpp"

namespace vpm {

// Joint-action interface shared by all planners and the learned policy.
// A policy may request specific start cells (the cyclic planner does).
class Policy {
public:
  virtual ~Policy() = default;
  virtual std::vector<Action> act(const WorldState& state) = 0;
  virtual std::optional<std::vector<Cell>> initial_positions(int /*n_agents*/) {
    return std::nullopt;
  }
  virtual std::string name() const = 0;
};

// --- Random baseline ---------------------------------------------------

inline std::vector<Action> random_joint_action(int n_agents, Rng& rng) {
  std::vector<Action> out(n_agents);
  for (auto& a : out) a = static_cast<Action>(rng.uniform_int(0, kActionCount - 1));
  return out;
}

class RandomPolicy : public Policy {
public:
  explicit RandomPolicy(Rng rng) : rng_(rng) {}
  std::vector<Action> act(const WorldState& state) override {
    return random_joint_action(static_cast<int>(state.agents.size()), rng_);
  }
  std::string name() const override { return "random"; }

private:
  Rng rng_;
};

// --- Greedy centralized search ------------------------------------------

// Candidate targets: free cells with nonzero penalty, scanned in descending
// |penalty| (ties row-major). Each pick suppresses everything within
// Euclidean distance d_min of it, so the returned cells are mutually more
// than d_min apart.
inline std::vector<Cell> gcs_select_candidates(const WorldState& state, double d_min) {
  struct Entry {
    double value;
    int index;
  };
  std::vector<Entry> pool;
  for (int i = 0; i < state.map.cell_count(); ++i) {
    if (state.map.at(state.map.cell(i)) != CellKind::Free) continue;
    if (state.penalties.value[i] != 0.0) pool.push_back({state.penalties.value[i], i});
  }
  std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value < b.value;  // more negative first
    return a.index < b.index;
  });

  const double d2 = d_min * d_min;
  std::vector<Cell> candidates;
  std::vector<char> alive(pool.size(), 1);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!alive[i]) continue;
    const Cell c = state.map.cell(pool[i].index);
    candidates.push_back(c);
    for (std::size_t j = i; j < pool.size(); ++j) {
      if (!alive[j]) continue;
      const Cell other = state.map.cell(pool[j].index);
      const double dr = other.row - c.row, dc = other.col - c.col;
      if (dr * dr + dc * dc <= d2) alive[j] = 0;
    }
  }
  return candidates;
}

struct Assignment {
  struct Slot {
    bool assigned = false;
    Cell target;
    std::vector<Cell> path;  // committed shortest path, pos .. target
    std::size_t step = 0;    // index of the agent's current cell in path
  };
  std::vector<Slot> slots;
};

// One planning step: drop assignments that are finished (target reached) or
// stale (target penalty reset to zero), rebuild the candidate list, assign
// free agents in ascending id order to their nearest unclaimed candidate by
// path length, and emit each agent's next move along its committed path.
inline std::vector<Action> gcs_step(const WorldState& state, Assignment& assignment,
                                    double d_min) {
  const int n = static_cast<int>(state.agents.size());
  assignment.slots.resize(n);

  for (int i = 0; i < n; ++i) {
    auto& slot = assignment.slots[i];
    if (!slot.assigned) continue;
    const bool reached = state.agents[i].pos == slot.target;
    const bool stale = state.penalties.value[state.map.index(slot.target)] == 0.0;
    if (reached || stale) slot = {};
  }

  const std::vector<Cell> candidates = gcs_select_candidates(state, d_min);
  std::vector<char> claimed(candidates.size(), 0);
  for (int i = 0; i < n; ++i) {
    const auto& slot = assignment.slots[i];
    if (!slot.assigned) continue;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (candidates[k] == slot.target) claimed[k] = 1;
  }

  for (int i = 0; i < n; ++i) {
    auto& slot = assignment.slots[i];
    if (slot.assigned) continue;
    const std::vector<int> dist = distance_field(state.map, state.agents[i].pos);
    int best = -1, best_dist = 0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (claimed[k]) continue;
      const int d = dist[state.map.index(candidates[k])];
      if (d < 0) continue;  // unreachable
      if (best == -1 || d < best_dist) {
        best = static_cast<int>(k);
        best_dist = d;
      }
    }
    if (best >= 0) {
      claimed[best] = 1;
      slot.assigned = true;
      slot.target = candidates[best];
      slot.path = *shortest_path(state.map, state.agents[i].pos, slot.target);
      slot.step = 0;
    }
  }

  std::vector<Action> actions(n, Action::Stay);
  for (int i = 0; i < n; ++i) {
    auto& slot = assignment.slots[i];
    if (!slot.assigned || slot.step + 1 >= slot.path.size()) continue;
    actions[i] = action_towards(slot.path[slot.step], slot.path[slot.step + 1]);
    ++slot.step;
  }
  return actions;
}

class GcsPolicy : public Policy {
public:
  explicit GcsPolicy(double d_min) : d_min_(d_min) {}
  std::vector<Action> act(const WorldState& state) override {
    return gcs_step(state, assignment_, d_min_);
  }
  std::string name() const override { return "gcs"; }

private:
  double d_min_;
  Assignment assignment_;
};

// --- Guard points and the cyclic tour -----------------------------------

// Greedy set cover: repeatedly pick the free cell whose field of view covers
// the most uncovered free cells (ties row-major) until everything is seen.
// Every free cell sees itself, so the loop always terminates.
inline std::vector<Cell> guard_points(const GridMap& map, int fov) {
  const std::vector<Cell> free = map.free_cells();

  // coverage[i] = indices (into `free`) seen from free[i]
  std::vector<std::vector<int>> coverage(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) {
    const VisibilityMask mask = visible_cells(map, free[i], fov);
    for (std::size_t j = 0; j < free.size(); ++j)
      if (mask.at(free[j])) coverage[i].push_back(static_cast<int>(j));
  }

  std::vector<char> covered(free.size(), 0);
  std::size_t n_uncovered = free.size();
  std::vector<Cell> picks;
  while (n_uncovered > 0) {
    int best = -1, best_gain = 0;
    for (std::size_t i = 0; i < free.size(); ++i) {
      int gain = 0;
      for (int j : coverage[i]) gain += !covered[j];
      if (gain > best_gain) {
        best_gain = gain;
        best = static_cast<int>(i);
      }
    }
    for (int j : coverage[best]) {
      if (!covered[j]) {
        covered[j] = 1;
        --n_uncovered;
      }
    }
    picks.push_back(free[best]);
  }
  return picks;
}

// Closed tour through a set of guard points, stitched into a cell-level
// cyclic walk. cycle[k] -> cycle[(k+1) % cycle.size()] is always one step.
struct Tour {
  std::vector<Cell> order;  // guard points in visiting order
  std::vector<Cell> cycle;  // stitched closed walk, one entry per step
  int total_steps() const { return cycle.size() <= 1 ? 0 : static_cast<int>(cycle.size()); }
};

// Nearest-neighbor construction from the first point followed by 2-opt
// descent, over shortest-path step distances. Deterministic: fixed start,
// fixed scan order, first improving swap taken.
inline Tour tsp_tour(const std::vector<Cell>& points, const GridMap& map) {
  if (points.empty()) throw std::invalid_argument("tsp_tour needs at least one point");
  const int n = static_cast<int>(points.size());

  std::vector<std::vector<int>> d(n, std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i) {
    const std::vector<int> field = distance_field(map, points[i]);
    for (int j = 0; j < n; ++j) {
      d[i][j] = field[map.index(points[j])];
      if (d[i][j] < 0)
        throw std::runtime_error("tsp_tour: guard points are not mutually reachable");
    }
  }

  std::vector<int> order{0};
  std::vector<char> used(n, 0);
  used[0] = 1;
  while (static_cast<int>(order.size()) < n) {
    const int cur = order.back();
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      if (best == -1 || d[cur][j] < d[cur][best]) best = j;
    }
    used[best] = 1;
    order.push_back(best);
  }

  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 1; i < n - 1 && !improved; ++i) {
      for (int j = i + 1; j < n && !improved; ++j) {
        const int jn = (j + 1) % n;
        const int delta = d[order[i - 1]][order[j]] + d[order[i]][order[jn]] -
                          d[order[i - 1]][order[i]] - d[order[j]][order[jn]];
        if (delta < 0) {
          std::reverse(order.begin() + i, order.begin() + j + 1);
          improved = true;
        }
      }
    }
  }

  Tour tour;
  for (int idx : order) tour.order.push_back(points[idx]);
  if (n == 1) {
    tour.cycle = {points[0]};
    return tour;
  }
  for (int i = 0; i < n; ++i) {
    const Cell from = tour.order[i];
    const Cell to = tour.order[(i + 1) % n];
    const std::vector<Cell> path = *shortest_path(map, from, to);
    tour.cycle.insert(tour.cycle.end(), path.begin(), path.end() - 1);
  }
  return tour;
}

// Agents are spread evenly along the cycle (agent i starts at index
// floor(i*len/n)) and everyone advances one cell per step, forever.
class TspcPolicy : public Policy {
public:
  TspcPolicy(Tour tour, int n_agents) : tour_(std::move(tour)) {
    const std::size_t len = tour_.cycle.size();
    for (int i = 0; i < n_agents; ++i)
      cursor_.push_back(static_cast<std::size_t>(i) * len / n_agents);
  }

  std::optional<std::vector<Cell>> initial_positions(int n_agents) override {
    if (n_agents != static_cast<int>(cursor_.size()))
      throw std::invalid_argument("tspc policy was built for a different agent count");
    std::vector<Cell> out;
    for (std::size_t c : cursor_) out.push_back(tour_.cycle[c]);
    return out;
  }

  std::vector<Action> act(const WorldState& state) override {
    if (state.agents.size() != cursor_.size())
      throw std::invalid_argument("tspc policy agent count mismatch");
    const std::size_t len = tour_.cycle.size();
    std::vector<Action> actions(cursor_.size(), Action::Stay);
    for (std::size_t i = 0; i < cursor_.size(); ++i) {
      const std::size_t next = (cursor_[i] + 1) % len;
      actions[i] = action_towards(tour_.cycle[cursor_[i]], tour_.cycle[next]);
      cursor_[i] = next;
    }
    return actions;
  }

  const Tour& tour() const { return tour_; }
  std::string name() const override { return "tspc"; }

private:
  Tour tour_;
  std::vector<std::size_t> cursor_;
};

inline TspcPolicy make_tspc_policy(const GridMap& map, int fov, int n_agents) {
  return TspcPolicy(tsp_tour(guard_points(map, fov), map), n_agents);
}

}  // namespace vpm
