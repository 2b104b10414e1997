#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vpm {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline int chebyshev(Cell a, Cell b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

inline int manhattan(Cell a, Cell b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

enum class CellKind : std::uint8_t { Free, Obstacle };

struct MapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Static occupancy grid. Row 0 is the top line of the map file.
class GridMap {
public:
  GridMap(int width, int height, CellKind fill = CellKind::Free)
      : width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 1 || height < 1) throw MapError("map dimensions must be at least 1x1");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }

  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }

  int index(Cell c) const { return c.row * width_ + c.col; }
  Cell cell(int index) const { return {index / width_, index % width_}; }

  CellKind at(Cell c) const { return cells_[index(c)]; }
  void set(Cell c, CellKind k) { cells_[index(c)] = k; }

  bool is_free(Cell c) const { return in_bounds(c) && at(c) == CellKind::Free; }
  bool is_obstacle(Cell c) const { return in_bounds(c) && at(c) == CellKind::Obstacle; }

  int free_count() const {
    return static_cast<int>(std::count(cells_.begin(), cells_.end(), CellKind::Free));
  }

  std::vector<Cell> free_cells() const {
    std::vector<Cell> out;
    out.reserve(cells_.size());
    for (int i = 0; i < cell_count(); ++i)
      if (cells_[i] == CellKind::Free) out.push_back(cell(i));
    return out;
  }

  friend bool operator==(const GridMap&, const GridMap&) = default;

private:
  int width_;
  int height_;
  std::vector<CellKind> cells_;
};

struct LoadedMap {
  GridMap map;
  std::vector<Cell> starts;  // cells marked 'A', in row-major order
};

// Map file alphabet: '.' free, '#' obstacle, 'A' free cell with a declared
// agent start. Rows are newline-separated and must all have equal length.
inline LoadedMap load_map(std::string_view text) {
  std::vector<std::string> rows;
  std::string line;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!(i == text.size() && line.empty())) rows.push_back(line);
      line.clear();
    } else {
      line.push_back(text[i]);
    }
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw MapError("empty map");

  const std::size_t width = rows[0].size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw MapError("ragged map: row " + std::to_string(r) + " has length " +
                     std::to_string(rows[r].size()) + ", expected " + std::to_string(width));
  }
  if (width == 0) throw MapError("empty map rows");

  GridMap map(static_cast<int>(width), static_cast<int>(rows.size()));
  std::vector<Cell> starts;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      char ch = rows[r][c];
      Cell cell{r, c};
      switch (ch) {
        case '.': break;
        case '#': map.set(cell, CellKind::Obstacle); break;
        case 'A': starts.push_back(cell); break;
        default:
          throw MapError(std::string("unknown map character '") + ch + "' at row " +
                         std::to_string(r) + ", col " + std::to_string(c));
      }
    }
  }
  if (map.free_count() == 0) throw MapError("map has no free cells");
  return {std::move(map), std::move(starts)};
}

inline LoadedMap load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapError("cannot open map file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_map(ss.str());
}

}  // namespace vpm
