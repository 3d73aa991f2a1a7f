#include "tire/grid.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace tire {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

}  // namespace

Grid::Grid(int width, int height, double fill)
    : width_(width), height_(height), v_(static_cast<std::size_t>(width) * height, fill) {
  check_dims(width, height);
  if (!std::isfinite(fill)) throw NumericError("grid fill value must be finite");
}

Grid::Grid(int width, int height, std::vector<double> values)
    : width_(width), height_(height), v_(std::move(values)) {
  check_dims(width, height);
  if (v_.size() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("grid value count " + std::to_string(v_.size()) + " does not match " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  for (double v : v_) {
    if (!std::isfinite(v)) throw NumericError("grid values must be finite");
  }
}

double Grid::at(PixelCoord c) const {
  if (!in_bounds(c)) {
    throw ShapeError("pixel (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                     ") out of bounds for " + std::to_string(width_) + "x" + std::to_string(height_));
  }
  return (*this)(c.x, c.y);
}

double Grid::max_value() const {
  double mx = -HUGE_VAL;
  for (double v : v_) mx = v > mx ? v : mx;
  return mx;
}

BinaryGrid::BinaryGrid(int width, int height)
    : width_(width), height_(height), v_(static_cast<std::size_t>(width) * height, 0) {
  check_dims(width, height);
}

std::size_t BinaryGrid::count_ones() const {
  std::size_t n = 0;
  for (auto b : v_) n += b;
  return n;
}

Grid BinaryGrid::to_grid() const {
  Grid g(width_, height_);
  for (std::size_t i = 0; i < v_.size(); ++i) g.values()[i] = v_[i];
  return g;
}

BinaryGrid BinaryGrid::from_grid(const Grid& g) {
  BinaryGrid b(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) b.set(x, y, g(x, y) > 0.5);
  return b;
}

std::vector<PixelCoord> los_pixels(PixelCoord a, PixelCoord b, int width, int height) {
  const auto in = [&](PixelCoord c) {
    return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
  };
  if (!in(a) || !in(b)) {
    throw ShapeError("los_pixels: endpoint out of bounds for " + std::to_string(width) + "x" +
                     std::to_string(height));
  }

  const long long dx = b.x - a.x;
  const long long dy = b.y - a.y;
  const long long adx = dx < 0 ? -dx : dx;
  const long long ady = dy < 0 ? -dy : dy;
  const int sx = dx > 0 ? 1 : -1;
  const int sy = dy > 0 ? 1 : -1;

  std::vector<PixelCoord> cells;
  if (adx + ady == 0) return cells;
  cells.reserve(static_cast<std::size_t>(adx + ady + 1));

  // Walk the boundary crossings in order of the segment parameter. The i-th
  // vertical crossing happens at t = (i - 1/2)/adx and the j-th horizontal one
  // at t = (j - 1/2)/ady; comparing (2i-1)*ady against (2j-1)*adx is exact.
  int cx = a.x, cy = a.y;
  long long i = 1, j = 1;
  while (i <= adx && j <= ady) {
    const long long tx = (2 * i - 1) * ady;
    const long long ty = (2 * j - 1) * adx;
    if (tx < ty) {
      cx += sx;
      ++i;
      cells.push_back({cx, cy});
    } else if (tx > ty) {
      cy += sy;
      ++j;
      cells.push_back({cx, cy});
    } else {
      // Exact corner crossing: both side cells are touched at that point.
      cells.push_back({cx + sx, cy});
      cells.push_back({cx, cy + sy});
      cx += sx;
      cy += sy;
      ++i;
      ++j;
      cells.push_back({cx, cy});
    }
  }
  while (i <= adx) {
    cx += sx;
    ++i;
    cells.push_back({cx, cy});
  }
  while (j <= ady) {
    cy += sy;
    ++j;
    cells.push_back({cx, cy});
  }
  cells.pop_back();  // last pushed cell is b
  return cells;
}

Grid max_normalize(const Grid& g) {
  const double mx = g.max_value();
  if (!(mx > 0.0)) {
    throw NumericError("max_normalize: degenerate input, maximum must be strictly positive");
  }
  Grid out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) out.values()[i] = g.values()[i] / mx;
  return out;
}

double euclidean_distance(PixelCoord a, PixelCoord b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace tire
