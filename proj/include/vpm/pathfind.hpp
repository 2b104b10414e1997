#pragma once

#include <optional>
#include <vector>

#include "vpm/grid.hpp"
#include "vpm/world.hpp"

namespace vpm {

// Minimum-step 4-connected path from start to goal, both inclusive, or
// nullopt when the goal is unreachable. Uniform step costs make breadth-first
// search an exact shortest-path solver here; ties are broken by the fixed
// neighbor expansion order Up, Down, Left, Right, so the returned path is
// deterministic.
inline std::optional<std::vector<Cell>> shortest_path(const GridMap& map, Cell start,
                                                      Cell goal) {
  if (!map.is_free(start) || !map.is_free(goal))
    throw std::invalid_argument("shortest_path endpoints must be free cells");
  if (start == goal) return std::vector<Cell>{start};

  constexpr Action kOrder[4] = {Action::Up, Action::Down, Action::Left, Action::Right};
  std::vector<int> parent(static_cast<std::size_t>(map.cell_count()), -1);
  parent[map.index(start)] = map.index(start);
  std::vector<Cell> frontier{start}, next;
  while (!frontier.empty()) {
    for (Cell cur : frontier) {
      for (Action a : kOrder) {
        const Cell d = action_delta(a);
        const Cell nb{cur.row + d.row, cur.col + d.col};
        if (!map.is_free(nb) || parent[map.index(nb)] != -1) continue;
        parent[map.index(nb)] = map.index(cur);
        if (nb == goal) {
          std::vector<Cell> path{goal};
          Cell c = goal;
          while (c != start) {
            c = map.cell(parent[map.index(c)]);
            path.push_back(c);
          }
          std::reverse(path.begin(), path.end());
          return path;
        }
        next.push_back(nb);
      }
    }
    frontier.swap(next);
    next.clear();
  }
  return std::nullopt;
}

// Full-map step distances from `source` (-1 where unreachable), same
// expansion order as shortest_path.
inline std::vector<int> distance_field(const GridMap& map, Cell source) {
  if (!map.is_free(source)) throw std::invalid_argument("distance_field source must be free");
  constexpr Action kOrder[4] = {Action::Up, Action::Down, Action::Left, Action::Right};
  std::vector<int> dist(static_cast<std::size_t>(map.cell_count()), -1);
  dist[map.index(source)] = 0;
  std::vector<Cell> frontier{source}, next;
  int d = 0;
  while (!frontier.empty()) {
    ++d;
    for (Cell cur : frontier) {
      for (Action a : kOrder) {
        const Cell dd = action_delta(a);
        const Cell nb{cur.row + dd.row, cur.col + dd.col};
        if (!map.is_free(nb) || dist[map.index(nb)] != -1) continue;
        dist[map.index(nb)] = d;
        next.push_back(nb);
      }
    }
    frontier.swap(next);
    next.clear();
  }
  return dist;
}

}  // namespace vpm
