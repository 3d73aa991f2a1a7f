#include "tire/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "tire/rng.hpp"

namespace tire {

namespace {
constexpr std::uint64_t kShadowStream = 0x5badc0de11ULL;
}

void SimParams::validate() const {
  if (!(pathloss_exponent > 0.0)) throw ConfigError("pathloss_exponent must be > 0");
  if (wall_loss_db < 0.0) throw ConfigError("wall_loss_db must be >= 0");
  if (shadow_sigma_db < 0.0) throw ConfigError("shadow_sigma_db must be >= 0");
  if (!(floor_db < ref_power_db)) throw ConfigError("floor_db must be below ref_power_db");
}

void OutageParams::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("outage threshold must be in (0,1)");
}

void Scene::validate() const {
  if (transmitters.empty()) throw ConfigError("scene needs at least one transmitter");
  for (const auto& t : transmitters) {
    if (!buildings.in_bounds(t)) throw ConfigError("transmitter out of bounds");
    if (buildings.get(t) != 0) throw ConfigError("transmitter sits on a building pixel");
  }
}

Grid simulate_radiomap(const Scene& scene, const SimParams& p) {
  scene.validate();
  p.validate();
  const int w = scene.buildings.width();
  const int h = scene.buildings.height();
  const double span = p.ref_power_db - p.floor_db;

  std::vector<double> shadow;
  if (p.shadow_sigma_db > 0.0) {
    shadow.resize(static_cast<std::size_t>(w) * h);
    Rng rng(mix_seed(scene.seed, kShadowStream));
    for (auto& s : shadow) s = p.shadow_sigma_db * rng.normal();
  }

  Grid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (scene.buildings.get(x, y) != 0) {
        out(x, y) = 0.0;  // floor
        continue;
      }
      const PixelCoord here{x, y};
      double best_db = -HUGE_VAL;
      for (const auto& tx : scene.transmitters) {
        const double d = std::max(euclidean_distance(here, tx), 1.0);
        int walls = 0;
        for (const auto& c : los_pixels(here, tx, w, h)) walls += scene.buildings.get(c);
        const double db =
            p.ref_power_db - 10.0 * p.pathloss_exponent * std::log10(d) - p.wall_loss_db * walls;
        best_db = std::max(best_db, db);
      }
      if (!shadow.empty()) best_db += shadow[static_cast<std::size_t>(y) * w + x];
      const double clamped = std::clamp(best_db, p.floor_db, p.ref_power_db);
      out(x, y) = (clamped - p.floor_db) / span;
    }
  }
  return out;
}

Grid outage_map(const Grid& rm, const OutageParams& o) {
  o.validate();
  Grid z(rm.width(), rm.height());
  for (std::size_t i = 0; i < rm.size(); ++i)
    z.values()[i] = rm.values()[i] < o.threshold ? 1.0 : 0.0;
  return z;
}

Scene random_scene(int n, int n_buildings, int n_tx, std::uint64_t seed) {
  if (n < 2) throw ConfigError("scene size must be at least 2");
  if (n_tx < 1) throw ConfigError("need at least one transmitter");
  if (n_buildings < 0) throw ConfigError("building count must be non-negative");
  if (static_cast<long long>(n_tx) > static_cast<long long>(n) * n / 4) {
    throw ConfigError("transmitter count infeasible for grid size");
  }

  Rng rng(mix_seed(seed, 0x5ce9ef00dULL));
  std::vector<PixelCoord> txs;
  std::unordered_set<int> used;
  for (int k = 0; k < n_tx; ++k) {
    int attempts = 0;
    for (;;) {
      const int idx = rng.below_int(n * n);
      if (used.insert(idx).second) {
        txs.push_back({idx % n, idx / n});
        break;
      }
      if (++attempts > 1000) throw ConfigError("transmitter placement failed");
    }
  }

  BinaryGrid buildings(n, n);
  const int max_side = std::max(2, n / 4);
  for (int bidx = 0; bidx < n_buildings; ++bidx) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const int bw = 2 + rng.below_int(std::max(1, max_side - 1));
      const int bh = 2 + rng.below_int(std::max(1, max_side - 1));
      if (bw > n || bh > n) continue;
      const int x0 = rng.below_int(n - bw + 1);
      const int y0 = rng.below_int(n - bh + 1);
      bool hits_tx = false;
      for (const auto& t : txs) {
        if (t.x >= x0 && t.x < x0 + bw && t.y >= y0 && t.y < y0 + bh) {
          hits_tx = true;
          break;
        }
      }
      if (hits_tx) continue;
      for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) buildings.set(x, y, true);
      placed = true;
    }
    if (!placed) {
      throw ConfigError("scene generation failed: could not place building " +
                        std::to_string(bidx) + " without covering a transmitter");
    }
  }

  Scene scene{std::move(buildings), std::move(txs), seed};
  scene.validate();
  return scene;
}

}  // namespace tire
