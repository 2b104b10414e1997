#pragma once

#include <span>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "vpm/grid.hpp"

namespace vpm {

class VisibilityMask {
public:
  VisibilityMask(int width, int height)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(Cell c) const { return bits_[c.row * width_ + c.col] != 0; }
  void set(Cell c, bool v = true) { bits_[c.row * width_ + c.col] = v ? 1 : 0; }

  void merge(const VisibilityMask& other) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  }

  int count() const {
    int n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  bool same_shape(int width, int height) const { return width_ == width && height_ == height; }

  friend bool operator==(const VisibilityMask&, const VisibilityMask&) = default;

private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

// Enumerates every cell the ideal segment between the centers of a and b
// touches, endpoints included. When the segment crosses a lattice corner
// exactly, both side cells are visited, so two obstacles kissing at a corner
// block the ray. The endpoints are canonicalized first, which makes the
// visited set identical for (a,b) and (b,a).
template <typename F>
void for_each_segment_cell(Cell a, Cell b, F&& visit) {
  if (std::tie(b.row, b.col) < std::tie(a.row, a.col)) std::swap(a, b);
  int y = a.row, x = a.col;
  int dy = b.row - a.row, dx = b.col - a.col;
  const int ystep = (dy > 0) - (dy < 0);
  const int xstep = (dx > 0) - (dx < 0);
  dy = std::abs(dy);
  dx = std::abs(dx);
  const int ddy = 2 * dy, ddx = 2 * dx;

  visit(Cell{y, x});
  if (dx >= dy) {
    int error = dx, errorprev = dx;
    for (int i = 0; i < dx; ++i) {
      x += xstep;
      error += ddy;
      if (error > ddx) {
        y += ystep;
        error -= ddx;
        if (error + errorprev < ddx) {
          visit(Cell{y - ystep, x});
        } else if (error + errorprev > ddx) {
          visit(Cell{y, x - xstep});
        } else {  // exact corner crossing
          visit(Cell{y - ystep, x});
          visit(Cell{y, x - xstep});
        }
      }
      visit(Cell{y, x});
      errorprev = error;
    }
  } else {
    int error = dy, errorprev = dy;
    for (int i = 0; i < dy; ++i) {
      y += ystep;
      error += ddx;
      if (error > ddy) {
        x += xstep;
        error -= ddy;
        if (error + errorprev < ddy) {
          visit(Cell{y, x - xstep});
        } else if (error + errorprev > ddy) {
          visit(Cell{y - ystep, x});
        } else {
          visit(Cell{y, x - xstep});
          visit(Cell{y - ystep, x});
        }
      }
      visit(Cell{y, x});
      errorprev = error;
    }
  }
}

// True iff every cell strictly between a and b on the ray is free. The
// viewer's own cell and all eight neighbors are always visible; an obstacle
// endpoint is visible when the ray reaches it (walls can be seen, they just
// hide what is behind them).
inline bool line_of_sight(const GridMap& map, Cell a, Cell b) {
  if (!map.in_bounds(a) || !map.in_bounds(b))
    throw std::out_of_range("line_of_sight: cell outside map");
  if (chebyshev(a, b) <= 1) return true;
  bool clear = true;
  for_each_segment_cell(a, b, [&](Cell c) {
    if (c == a || c == b) return;
    if (map.at(c) == CellKind::Obstacle) clear = false;
  });
  return clear;
}

// Occlusion-aware square field of view of side `fov` centered at pos,
// clipped at the map borders. `fov` must be odd so the window centers on
// the agent.
inline VisibilityMask visible_cells(const GridMap& map, Cell pos, int fov) {
  if (fov < 1 || fov % 2 == 0)
    throw std::invalid_argument("field-of-view side length must be odd and >= 1, got " +
                                std::to_string(fov));
  if (!map.is_free(pos))
    throw std::invalid_argument("field-of-view center must be a free cell inside the map");

  VisibilityMask mask(map.width(), map.height());
  const int half = fov / 2;
  const int r0 = std::max(0, pos.row - half), r1 = std::min(map.height() - 1, pos.row + half);
  const int c0 = std::max(0, pos.col - half), c1 = std::min(map.width() - 1, pos.col + half);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      Cell target{r, c};
      if (line_of_sight(map, pos, target)) mask.set(target);
    }
  return mask;
}

// Cellwise union of all agents' fields of view. No agents -> all-false mask.
inline VisibilityMask joint_visibility(const GridMap& map, std::span<const Cell> positions,
                                       int fov) {
  VisibilityMask mask(map.width(), map.height());
  for (Cell p : positions) mask.merge(visible_cells(map, p, fov));
  return mask;
}

}  // namespace vpm
