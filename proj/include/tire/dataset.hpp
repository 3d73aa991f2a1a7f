#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tire/grid.hpp"

namespace tire {

struct Sample {
  PixelCoord coord;
  double value = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

// Sparse (x, y, value) observations drawn from a normalized radiomap.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(int width, int height, std::vector<Sample> entries);  // validates

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Sample>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Sample> entries_;
};

struct PreprocessParams {
  double low_threshold = 0.0;              // drop observations below this, in [0,1)
  double sampling_ratio = 0.01;            // sr, in (0,1]
  std::optional<double> noise_snr_db;      // nullopt or +inf = no noise
  std::uint64_t seed = 0;
  void validate() const;
};

// floor(sr * W * H) distinct pixels chosen uniformly (seeded); samples whose
// value falls below low_threshold are dropped after selection. Errors out if
// nothing survives.
SampleSet sample_uniform(const Grid& rm, const PreprocessParams& p);

// Zero-padded observation image M_S: sample values at sampled coords, 0 elsewhere.
Grid to_observation_grid(const SampleSet& s);

// Additive Gaussian noise at the given SNR; sigma^2 = mean(value^2) / 10^(snr/10),
// computed over the sample set. Values are clamped back to [0,1].
SampleSet add_awgn(const SampleSet& s, double snr_db, std::uint64_t seed);

// Rasters: 8-bit grayscale PNG or ASCII PGM (P2, maxval 255), picked by
// extension. Pixel v maps to v/255; save rounds half-up.
Grid load_raster(const std::string& path);
void save_raster(const Grid& g, const std::string& path);

// SampleSet CSV: header "x,y,value", one row per sample.
void save_samples_csv(const SampleSet& s, const std::string& path);
SampleSet load_samples_csv(const std::string& path, int width, int height);

struct ManifestEntry {
  std::string gain;
  std::string buildings;
  std::vector<PixelCoord> tx;
  std::string split;  // train | val | test
};

struct DbNormalization {
  double lo_db = 0.0;
  double hi_db = 0.0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::optional<DbNormalization> normalization;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// Deterministic, disjoint, exhaustive split by seeded shuffle. Fractions are
// {train, val, test} and must sum to 1 (+-1e-9); floor sizing with the
// remainder going to train.
DatasetManifest split_dataset(const DatasetManifest& m, const std::array<double, 3>& fractions,
                              std::uint64_t seed);

namespace detail {
// PNG codec internals, exposed for the raster tests.
std::vector<std::uint8_t> encode_png_gray8(int width, int height,
                                           const std::vector<std::uint8_t>& pixels);
void decode_png_gray8(const std::vector<std::uint8_t>& bytes, int& width, int& height,
                      std::vector<std::uint8_t>& pixels);
}  // namespace detail

}  // namespace tire
