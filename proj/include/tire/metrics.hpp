#pragma once

#include <string>
#include <vector>

#include "tire/grid.hpp"

namespace tire::metrics {

// Mean squared error over all pixels.
double mse(const Grid& y, const Grid& y_hat);

// Per-pixel normalized MSE: mean of (y_i - yhat_i)^2 / y_i^2 over the pixels
// with y_i >= eps; sub-eps pixels are excluded from both sum and count.
// Default eps is one 8-bit quantization level.
double nmse(const Grid& y, const Grid& y_hat, double eps = 1.0 / 255.0);

// Aggregate form: sum((y - yhat)^2) / sum(y^2).
double nmse_agg(const Grid& y, const Grid& y_hat);

struct MapMetrics {
  double mse = 0.0;
  double nmse = 0.0;
  double nmse_agg = 0.0;
};

struct MetricReport {
  std::vector<MapMetrics> per_map;
  MapMetrics aggregate;  // mean of per-map values
  std::size_t map_count = 0;
  std::string config_echo;

  void finalize();  // recomputes aggregate and map_count
  void write_csv(const std::string& path) const;
};

// CSVs store raw values; these exact factors are applied only when rendering
// (reports conventionally show MSE x1e-4 and NMSE x1e-2).
inline double display_mse(double raw) { return raw * 1e4; }
inline double display_nmse(double raw) { return raw * 1e2; }

}  // namespace tire::metrics
