#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpm/grid.hpp"
#include "vpm/observation.hpp"
#include "vpm/trajectory.hpp"

namespace vpm {

struct ImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary portable graymap, values already in [0, 1].
inline void write_pgm(const std::string& path, int width, int height,
                      std::span<const double> gray) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write image: " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  for (double v : gray) {
    const int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw ImageError("image write failed: " + path);
}

// Debug dump of a rendered observation channel (raw code image).
inline void dump_observation_pgm(const std::string& path, const ObsImage& image,
                                 double max_penalty) {
  std::vector<double> gray(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) gray[i] = normalize_code(image[i], max_penalty);
  write_pgm(path, kObsSize, kObsSize, gray);
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

inline Rgb agent_hue(int agent) {
  // fixed palette, repeated past ten agents
  static constexpr Rgb kPalette[10] = {
      {255, 64, 64},  {64, 160, 255}, {64, 255, 96},  {255, 200, 32}, {200, 96, 255},
      {32, 224, 224}, {255, 128, 192}, {160, 255, 32}, {255, 96, 0},   {128, 128, 255},
  };
  return kPalette[agent % 10];
}

// Visit-frequency trail image: obstacles dark gray, unvisited free cells
// near-black, every agent in its own hue with brightness rising in the log of
// the visit count, final positions drawn as full-bright 3x3 markers. Output
// is a binary portable pixmap scaled up `scale` pixels per cell; bytes are a
// pure function of the log and map.
inline void emit_trail(const TrajectoryLog& log, const GridMap& map, const std::string& path,
                       int scale = 8) {
  if (map.width() != log.width || map.height() != log.height)
    throw ImageError("trail: map dimensions do not match the trajectory log");

  const int n_cells = map.cell_count();
  std::vector<std::vector<int>> visits(log.n_agents, std::vector<int>(n_cells, 0));
  int max_visits = 1;
  for (const auto& rec : log.positions)
    for (int i = 0; i < log.n_agents; ++i) {
      int& v = visits[i][map.index(rec[i])];
      ++v;
      max_visits = std::max(max_visits, v);
    }
  const double denom = std::log1p(static_cast<double>(max_visits));

  std::vector<Rgb> pixels(static_cast<std::size_t>(n_cells));
  for (int idx = 0; idx < n_cells; ++idx) {
    if (map.at(map.cell(idx)) == CellKind::Obstacle) {
      pixels[idx] = {70, 70, 70};
      continue;
    }
    double r = 15, g = 15, b = 15;
    for (int i = 0; i < log.n_agents; ++i) {
      if (visits[i][idx] == 0) continue;
      const double w = std::log1p(static_cast<double>(visits[i][idx])) / denom;
      const Rgb hue = agent_hue(i);
      r += w * hue.r;
      g += w * hue.g;
      b += w * hue.b;
    }
    pixels[idx] = {static_cast<std::uint8_t>(std::min(255.0, r)),
                   static_cast<std::uint8_t>(std::min(255.0, g)),
                   static_cast<std::uint8_t>(std::min(255.0, b))};
  }

  // final positions: bright 3x3 marker in the agent's hue
  const auto& final_pos = log.positions.back();
  for (int i = 0; i < log.n_agents; ++i) {
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const Cell c{final_pos[i].row + dr, final_pos[i].col + dc};
        if (map.in_bounds(c)) pixels[map.index(c)] = agent_hue(i);
      }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write image: " + path);
  out << "P6\n" << map.width() * scale << " " << map.height() * scale << "\n255\n";
  for (int r = 0; r < map.height() * scale; ++r)
    for (int c = 0; c < map.width() * scale; ++c) {
      const Rgb& p = pixels[(r / scale) * map.width() + (c / scale)];
      out.put(static_cast<char>(p.r));
      out.put(static_cast<char>(p.g));
      out.put(static_cast<char>(p.b));
    }
  if (!out) throw ImageError("image write failed: " + path);
}

}  // namespace vpm
