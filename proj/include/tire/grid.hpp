#pragma once

#include <cstdint>
#include <vector>

#include "tire/error.hpp"

namespace tire {

// 0-based pixel coordinate: x is the column, y is the row, origin top-left.
struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Fixed-size 2-D raster of 64-bit reals, row-major.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0);
  Grid(int width, int height, std::vector<double> values);  // validates size and finiteness

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return v_.size(); }

  double operator()(int x, int y) const { return v_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator()(int x, int y) { return v_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(PixelCoord c) const;

  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  bool in_bounds(PixelCoord c) const {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }
  bool same_shape(const Grid& o) const { return width_ == o.width_ && height_ == o.height_; }

  double max_value() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> v_;
};

// Raster of {0,1} values (building masks, transmitter masks).
class BinaryGrid {
 public:
  BinaryGrid() = default;
  BinaryGrid(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  int get(int x, int y) const { return v_[static_cast<std::size_t>(y) * width_ + x]; }
  int get(PixelCoord c) const { return get(c.x, c.y); }
  void set(int x, int y, bool on) { v_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }

  bool in_bounds(PixelCoord c) const {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }
  std::size_t count_ones() const;

  // Dense {0.0, 1.0} view, e.g. for use as a network input channel.
  Grid to_grid() const;
  // Threshold at 0.5; used when ingesting mask rasters.
  static BinaryGrid from_grid(const Grid& g);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> v_;
};

// Every intermediate cell the open segment between the centers of a and b
// passes through (supercover: cells the segment merely touches at a corner
// count too, attributed to both sides). Endpoints are excluded. The result
// for (a,b) equals the reversed result for (b,a) as a set.
std::vector<PixelCoord> los_pixels(PixelCoord a, PixelCoord b, int width, int height);

// Rescales so the maximum becomes exactly 1. Requires a strictly positive max.
Grid max_normalize(const Grid& g);

double euclidean_distance(PixelCoord a, PixelCoord b);

}  // namespace tire
