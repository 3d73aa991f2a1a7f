#pragma once

#include <cstdint>
#include <vector>

#include "tire/grid.hpp"

namespace tire {

// Ground-truth generator knobs: log-distance path loss with per-wall-pixel
// attenuation and optional log-normal shadowing, everything in dB.
struct SimParams {
  double ref_power_db = 0.0;      // power at 1-pixel distance
  double pathloss_exponent = 2.0; // gamma
  double wall_loss_db = 10.0;     // per building pixel crossed on the LOS
  double shadow_sigma_db = 0.0;
  double floor_db = -60.0;        // clamp floor, maps to normalized 0
  void validate() const;
};

struct OutageParams {
  double threshold = 0.2;  // normalized PSD units, in (0,1)
  void validate() const;
};

struct Scene {
  BinaryGrid buildings;
  std::vector<PixelCoord> transmitters;
  std::uint64_t seed = 0;
  void validate() const;
};

// Normalized PSD map in [0,1]. Per pixel the strongest transmitter wins
// (max over per-transmitter dB power); building interiors carry the floor.
// Deterministic given (scene, params).
Grid simulate_radiomap(const Scene& scene, const SimParams& p);

// 1 where the radiomap falls below the failure threshold, else 0.
Grid outage_map(const Grid& rm, const OutageParams& o);

// Random axis-aligned rectangular buildings that never cover a transmitter.
Scene random_scene(int n, int n_buildings, int n_tx, std::uint64_t seed);

}  // namespace tire
