#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "vpm/observation.hpp"

using namespace vpm;

namespace {
WorldState open_world(int n, std::vector<Cell> starts) {
  return make_world(GridMap(n, n), 1.0, 400.0, std::move(starts));
}
}  // namespace

TEST_CASE("render_local on a fresh episode is zeros with the agent marker") {
  const WorldState w = open_world(50, {{25, 25}});
  const ObsImage img = render_local(w, 0);
  for (int r = 0; r < kObsSize; ++r)
    for (int c = 0; c < kObsSize; ++c) {
      const double v = img[r * kObsSize + c];
      if (r == kObsCenter && c == kObsCenter) REQUIRE(v == kAgentCode);
      else REQUIRE(v == 0.0);
    }
}

TEST_CASE("render_local pads outside the map with the obstacle code") {
  const WorldState w = open_world(50, {{0, 0}});
  const ObsImage img = render_local(w, 0);
  int padded = 0;
  for (int r = 0; r < kObsSize; ++r)
    for (int c = 0; c < kObsSize; ++c) {
      const bool outside = r < kObsCenter || c < kObsCenter;
      if (outside) {
        REQUIRE(img[r * kObsSize + c] == kObstacleCode);
        ++padded;
      }
    }
  REQUIRE(padded == kObsSize * kObsSize - 13 * 13);  // three quadrants
}

TEST_CASE("render_local hides what a wall occludes") {
  GridMap map(50, 50);
  for (int r = 20; r <= 30; ++r) map.set({r, 28}, CellKind::Obstacle);  // wall right of agent
  WorldState w = make_world(map, 1.0, 400.0, {{25, 25}});
  for (int i = 0; i < map.cell_count(); ++i)
    if (map.at(map.cell(i)) == CellKind::Free) w.penalties.value[i] = -100.0;

  const ObsImage img = render_local(w, 0);
  for (int r = 0; r < kObsSize; ++r)
    for (int c = 0; c < kObsSize; ++c) {
      const Cell world{w.agents[0].pos.row + r - kObsCenter,
                       w.agents[0].pos.col + c - kObsCenter};
      if (!map.in_bounds(world) || world == w.agents[0].pos) continue;
      const double v = img[r * kObsSize + c];
      if (!oracle::line_of_sight(map, w.agents[0].pos, world) ||
          map.at(world) == CellKind::Obstacle) {
        REQUIRE(v == kObstacleCode);
      } else {
        REQUIRE(v == 100.0);
      }
    }
  // spot check: directly behind the wall
  REQUIRE(img[kObsCenter * kObsSize + kObsCenter + 4] == kObstacleCode);
  REQUIRE(img[kObsCenter * kObsSize + kObsCenter + 2] == 100.0);
}

TEST_CASE("render_local draws visible agents") {
  const WorldState w = open_world(50, {{25, 25}, {25, 28}});
  const ObsImage img = render_local(w, 0);
  REQUIRE(img[kObsCenter * kObsSize + kObsCenter + 3] == kAgentCode);
  REQUIRE(img[kObsCenter * kObsSize + kObsCenter] == kAgentCode);  // self
}

TEST_CASE("render_local is ego-centric") {
  auto scene = [](Cell agent, Cell obstacle_offset, Cell stale_offset) {
    GridMap map(40, 40);
    map.set({agent.row + obstacle_offset.row, agent.col + obstacle_offset.col},
            CellKind::Obstacle);
    WorldState w = make_world(map, 1.0, 400.0, {agent});
    w.penalties.value[map.index({agent.row + stale_offset.row,
                                 agent.col + stale_offset.col})] = -77.0;
    return render_local(w, 0);
  };
  const ObsImage a = scene({15, 15}, {2, 3}, {-4, 1});
  const ObsImage b = scene({18, 20}, {2, 3}, {-4, 1});  // same scene, translated
  REQUIRE(a == b);
}

TEST_CASE("render_local validates the agent id") {
  const WorldState w = open_world(30, {{10, 10}});
  REQUIRE_THROWS_AS(render_local(w, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(render_local(w, -1), std::invalid_argument);
}

TEST_CASE("render_mini summarizes blocks") {
  WorldState w = open_world(50, {{0, 0}});
  const ObsImage img = render_mini(w, 0);
  REQUIRE(img[0] == kAgentCode);  // block (0,0) holds the agent
  for (int i = 1; i < kObsSize * kObsSize; ++i) REQUIRE(img[i] == 0.0);
}

TEST_CASE("render_mini is obstacle-dominant and takes the worst penalty") {
  GridMap map(50, 50);
  map.set({0, 1}, CellKind::Obstacle);  // inside block (0,0)
  WorldState w = make_world(map, 1.0, 400.0, {{0, 0}});
  // block (0,1) covers cells (0..1, 2..3)
  w.penalties.value[map.index({0, 2})] = -10.0;
  w.penalties.value[map.index({0, 3})] = -40.0;
  w.penalties.value[map.index({1, 2})] = -5.0;
  w.penalties.value[map.index({1, 3})] = 0.0;

  const ObsImage img = render_mini(w, 0);
  REQUIRE(img[0] == kObstacleCode);  // obstacle beats the agent marker
  REQUIRE(img[1] == 40.0);           // max |penalty| aggregation
}

TEST_CASE("render_mini requires divisible dimensions") {
  const WorldState w = open_world(10, {{0, 0}});
  REQUIRE_THROWS_AS(render_mini(w, 0), std::invalid_argument);
}

TEST_CASE("render_mini draws only the observing agent") {
  WorldState w = open_world(50, {{0, 0}, {40, 40}});
  const ObsImage a = render_mini(w, 0);
  const ObsImage b = render_mini(w, 1);
  REQUIRE(a[0] == kAgentCode);
  REQUIRE(b[0] == 0.0);
  REQUIRE(b[20 * kObsSize + 20] == kAgentCode);
  REQUIRE(a[20 * kObsSize + 20] == 0.0);
  // everything else identical
  for (int r = 0; r < kObsSize; ++r)
    for (int c = 0; c < kObsSize; ++c) {
      if ((r == 0 && c == 0) || (r == 20 && c == 20)) continue;
      REQUIRE(a[r * kObsSize + c] == b[r * kObsSize + c]);
    }
}

TEST_CASE("normalization constants are frozen") {
  REQUIRE(normalize_code(kObstacleCode, 400.0) == 0.375);
  REQUIRE(normalize_code(kAgentCode, 400.0) == 0.5);
  REQUIRE(normalize_code(400.0, 400.0) == 0.5);   // full-scale penalty
  REQUIRE(400.0 / 400.0 == 1.0);                  // pre-offset scale
  REQUIRE(normalize_code(100.0, 400.0) == 0.125);
  REQUIRE(normalize_code(0.0, 400.0) == 0.0);
  // code mapping is independent of the clamp value
  REQUIRE(normalize_code(kObstacleCode, 100.0) == 0.375);
  REQUIRE(normalize_code(kAgentCode, 100.0) == 0.5);
}

TEST_CASE("make_observation assembles the requested channels") {
  WorldState w = open_world(50, {{25, 25}});
  const Observation both = make_observation(w, 0, ObsMode::Both);
  REQUIRE(both.channels == 2);
  REQUIRE(both.data.size() == 2u * kObsSize * kObsSize);
  const Observation local = make_observation(w, 0, ObsMode::Local);
  REQUIRE(local.channels == 1);
  REQUIRE(local.data.size() == 1u * kObsSize * kObsSize);
  // channel 0 of "both" is the local map
  for (int i = 0; i < kObsSize * kObsSize; ++i) REQUIRE(both.data[i] == local.data[i]);
}

TEST_CASE("rendered and normalized values stay in their codomains") {
  Rng rng(99);
  GridMap map = oracle::random_map(50, 50, 0.15, rng);
  const std::vector<Cell> free = map.free_cells();
  WorldState w = make_world(map, 1.0, 400.0, {free[0], free[100]});
  for (int i = 0; i < map.cell_count(); ++i)
    if (map.at(map.cell(i)) == CellKind::Free)
      w.penalties.value[i] = -rng.uniform(0.0, 400.0);

  for (int agent = 0; agent < 2; ++agent) {
    const ObsImage local = render_local(w, agent);
    const ObsImage mini = render_mini(w, agent);
    for (const ObsImage* img : {&local, &mini})
      for (double v : *img) {
        const bool code = v == kObstacleCode || v == kAgentCode;
        REQUIRE((code || (v >= 0.0 && v <= 400.0)));
      }
    const Observation obs = make_observation(w, agent, ObsMode::Both);
    for (double v : obs.data) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}
