#pragma once

#include "tire/grid.hpp"
#include "tire/scene.hpp"

namespace tire {

struct RdmParams {
  double lambda = 2.0;        // IDW decay exponent, > 0
  double min_distance = 1.0;  // singularity clamp at the transmitter pixel, >= 1
  void validate() const;
};

// Fraction of non-building cells on the line of sight between target and tx.
// An empty LOS set (identical or adjacent pixels) counts as unobstructed (1).
double shadow_ratio(const BinaryGrid& buildings, PixelCoord target, PixelCoord tx);

// max(d, min_distance)^(-lambda)
double idw_gain(PixelCoord target, PixelCoord tx, const RdmParams& p);

// Radio depth map: per pixel, sum over transmitters of idw_gain * shadow_ratio,
// then max-normalized. Values in [0,1] with the maximum exactly 1.
Grid radio_depth_map(const Scene& scene, const RdmParams& p);

}  // namespace tire
