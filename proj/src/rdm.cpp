#include "tire/rdm.hpp"

#include <algorithm>
#include <cmath>

#include "tire/parallel.hpp"

namespace tire {

void RdmParams::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("rdm lambda must be > 0");
  if (!(min_distance >= 1.0)) throw ConfigError("rdm min_distance must be >= 1");
}

double shadow_ratio(const BinaryGrid& buildings, PixelCoord target, PixelCoord tx) {
  const auto cells = los_pixels(target, tx, buildings.width(), buildings.height());
  if (cells.empty()) return 1.0;
  std::size_t open = 0;
  for (const auto& c : cells) open += 1 - buildings.get(c);
  return static_cast<double>(open) / static_cast<double>(cells.size());
}

double idw_gain(PixelCoord target, PixelCoord tx, const RdmParams& p) {
  const double d = std::max(euclidean_distance(target, tx), p.min_distance);
  return std::pow(d, -p.lambda);
}

Grid radio_depth_map(const Scene& scene, const RdmParams& p) {
  scene.validate();
  p.validate();
  const int w = scene.buildings.width();
  const int h = scene.buildings.height();
  Grid pre(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const PixelCoord here{x, y};
      double acc = 0.0;
      for (const auto& tx : scene.transmitters) {
        acc += idw_gain(here, tx, p) * shadow_ratio(scene.buildings, here, tx);
      }
      pre(x, y) = acc;
    }
  });
  // min_distance clamp keeps the transmitter pixel's own gain positive, so the
  // max is always > 0 and normalization cannot see a degenerate input.
  return max_normalize(pre);
}

}  // namespace tire
