#pragma once

#include <cstdint>

#include "tire/dataset.hpp"
#include "tire/grid.hpp"

namespace tire {

// Exponential semivariogram: gamma(h) = nugget + (sill - nugget) * (1 - exp(-3h/range)).
// The practical-range convention (factor 3) puts ~95% of the sill at h = range_param.
struct VariogramModel {
  double nugget = 0.0;
  double sill = 1.0;
  double range_param = 1.0;

  double operator()(double h) const;
  void validate() const;
};

// Shepard inverse-distance-weighted interpolation; exact at sample pixels.
Grid idw_interpolate(const SampleSet& s, double power);

// Empirical semivariogram (distance-binned 0.5*mean((vi-vj)^2)) fitted with an
// exponential model by seeded multi-start Nelder-Mead least squares.
// Needs at least 8 samples.
VariogramModel fit_variogram(const SampleSet& s, int n_bins, std::uint64_t seed = 0x5eedULL);

struct KrigingResult {
  Grid grid;
  int fallback_pixels = 0;  // pixels where the solve failed and IDW stood in
  double max_weight_sum_error = 0.0;  // max |sum(weights) - 1| over solved pixels
};

// Ordinary kriging with a Lagrange multiplier enforcing sum(weights) = 1.
// The augmented system is factored once (partial-pivot LU) and reused per
// pixel; unusable solves fall back to IDW (power 2) and are counted.
KrigingResult kriging_interpolate(const SampleSet& s, const VariogramModel& v);

}  // namespace tire
