#include "tire/metrics.hpp"

#include <cstdio>

#include "tire/error.hpp"

namespace tire::metrics {

namespace {

void check_shapes(const Grid& y, const Grid& y_hat, const char* op) {
  if (!y.same_shape(y_hat)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(y.width()) + "x" +
                     std::to_string(y.height()) + " vs " + std::to_string(y_hat.width()) + "x" +
                     std::to_string(y_hat.height()));
  }
}

}  // namespace

double mse(const Grid& y, const Grid& y_hat) {
  check_shapes(y, y_hat, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.values()[i] - y_hat.values()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

double nmse(const Grid& y, const Grid& y_hat, double eps) {
  check_shapes(y, y_hat, "nmse");
  if (!(eps > 0.0)) throw ConfigError("nmse eps must be > 0");
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yi = y.values()[i];
    if (yi < eps) continue;
    const double d = yi - y_hat.values()[i];
    acc += d * d / (yi * yi);
    ++used;
  }
  if (used == 0) throw NumericError("nmse: every pixel excluded by eps, metric undefined");
  return acc / static_cast<double>(used);
}

double nmse_agg(const Grid& y, const Grid& y_hat) {
  check_shapes(y, y_hat, "nmse_agg");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.values()[i] - y_hat.values()[i];
    num += d * d;
    den += y.values()[i] * y.values()[i];
  }
  if (den == 0.0) throw NumericError("nmse_agg: ground truth is all zero, metric undefined");
  return num / den;
}

void MetricReport::finalize() {
  map_count = per_map.size();
  aggregate = MapMetrics{};
  if (per_map.empty()) return;
  for (const auto& m : per_map) {
    aggregate.mse += m.mse;
    aggregate.nmse += m.nmse;
    aggregate.nmse_agg += m.nmse_agg;
  }
  const auto n = static_cast<double>(per_map.size());
  aggregate.mse /= n;
  aggregate.nmse /= n;
  aggregate.nmse_agg /= n;
}

void MetricReport::write_csv(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write report " + path);
  if (!config_echo.empty()) std::fprintf(f, "# %s\n", config_echo.c_str());
  std::fputs("map,mse,nmse,nmse_agg\n", f);
  for (std::size_t i = 0; i < per_map.size(); ++i) {
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g\n", i, per_map[i].mse, per_map[i].nmse,
                 per_map[i].nmse_agg);
  }
  std::fprintf(f, "mean,%.17g,%.17g,%.17g\n", aggregate.mse, aggregate.nmse, aggregate.nmse_agg);
  std::fclose(f);
}

}  // namespace tire::metrics
