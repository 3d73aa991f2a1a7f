#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "tire/dataset.hpp"
#include "tire/rng.hpp"
#include "tire/scene.hpp"

using namespace tire;
namespace fs = std::filesystem;

namespace {

Grid random_grid(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Grid g(w, h);
  for (auto& v : g.values()) v = rng.unit();
  return g;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("sample_uniform counts and determinism") {
  const Grid rm = random_grid(32, 32, 1);
  PreprocessParams p;
  p.sampling_ratio = 0.01;
  p.seed = 5;
  const SampleSet a = sample_uniform(rm, p);
  CHECK(a.size() == 10);  // floor(0.01 * 1024)
  const SampleSet b = sample_uniform(rm, p);
  CHECK(a.entries() == b.entries());

  std::set<std::pair<int, int>> coords;
  for (const auto& e : a.entries()) coords.insert({e.coord.x, e.coord.y});
  CHECK(coords.size() == a.size());  // without replacement
}

TEST_CASE("sample_uniform sr=1 covers every pixel") {
  const Grid rm = random_grid(8, 8, 2);
  PreprocessParams p;
  p.sampling_ratio = 1.0;
  const SampleSet s = sample_uniform(rm, p);
  REQUIRE(s.size() == 64);
  const Grid back = to_observation_grid(s);
  CHECK(back.values() == rm.values());
}

TEST_CASE("sample_uniform threshold drops after selection") {
  Grid rm(4, 4, 0.05);
  rm(0, 0) = 0.9;
  PreprocessParams p;
  p.sampling_ratio = 1.0;
  p.low_threshold = 0.5;
  const SampleSet s = sample_uniform(rm, p);
  REQUIRE(s.size() == 1);
  CHECK(s.entries()[0].coord == PixelCoord{0, 0});
}

TEST_CASE("sample_uniform error paths") {
  const Grid rm = random_grid(8, 8, 3);
  PreprocessParams p;
  p.sampling_ratio = 0.001;  // floor(0.064) == 0
  CHECK_THROWS_AS(sample_uniform(rm, p), ConfigError);

  PreprocessParams q;
  q.sampling_ratio = 1.0;
  q.low_threshold = 1.0 - 1e-9;  // above every value of a map with max < 1
  Grid low(4, 4, 0.3);
  CHECK_THROWS_AS(sample_uniform(low, q), ConfigError);
}

TEST_CASE("threshold monotonicity") {
  const Grid rm = random_grid(16, 16, 9);
  PreprocessParams p;
  p.sampling_ratio = 0.5;
  std::size_t prev = 1u << 20;
  for (double th : {0.0, 0.2, 0.4, 0.6, 0.8}) {
    p.low_threshold = th;
    const SampleSet s = sample_uniform(rm, p);
    REQUIRE(s.size() <= prev);
    prev = s.size();
  }
}

TEST_CASE("to_observation_grid zero-pads") {
  SampleSet empty(8, 8, {});
  const Grid g = to_observation_grid(empty);
  for (double v : g.values()) REQUIRE(v == 0.0);

  SampleSet one(8, 8, {{{3, 3}, 0.7}});
  const Grid h = to_observation_grid(one);
  int nonzero = 0;
  for (double v : h.values()) nonzero += v != 0.0;
  CHECK(nonzero == 1);
  CHECK(h(3, 3) == 0.7);
}

TEST_CASE("sample set invariants") {
  CHECK_THROWS_AS(SampleSet(4, 4, {{{5, 0}, 0.5}}), ShapeError);
  CHECK_THROWS_AS(SampleSet(4, 4, {{{1, 1}, 1.5}}), NumericError);
  CHECK_THROWS_AS(SampleSet(4, 4, {{{1, 1}, 0.5}, {{1, 1}, 0.6}}), ConfigError);
}

TEST_CASE("add_awgn sigma and determinism") {
  // values all 1 at snr 20 dB: sigma^2 = 1/100. Clamping at 1 clips the
  // positive half, so estimate sigma from E[min(n,0)^2] = sigma^2/2.
  SampleSet s(4, 1, {{{0, 0}, 1.0}, {{1, 0}, 1.0}, {{2, 0}, 1.0}, {{3, 0}, 1.0}});
  double acc2 = 0.0;
  const int reps = 25000;  // 4 samples each -> 1e5 draws
  for (int r = 0; r < reps; ++r) {
    const SampleSet noisy = add_awgn(s, 20.0, static_cast<std::uint64_t>(r));
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      const double n = noisy.entries()[i].value - 1.0;
      acc2 += n * n;
    }
  }
  const double n_draws = 4.0 * reps;
  CHECK(std::sqrt(2.0 * acc2 / n_draws) == doctest::Approx(0.1).epsilon(0.02));

  const SampleSet a = add_awgn(s, 20.0, 7);
  const SampleSet b = add_awgn(s, 20.0, 7);
  CHECK(a.entries() == b.entries());
}

TEST_CASE("add_awgn without clamping matches sigma") {
  // Values at 0.5 leave room on both sides, so almost nothing clips.
  std::vector<Sample> mid;
  for (int i = 0; i < 64; ++i) mid.push_back({{i % 8, i / 8}, 0.5});
  const SampleSet s(8, 8, mid);
  const double sigma = std::sqrt(0.25 / std::pow(10.0, 20.0 / 10.0));  // mean(v^2)=0.25
  double acc2 = 0.0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    const SampleSet noisy = add_awgn(s, 20.0, 100 + static_cast<std::uint64_t>(r));
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      const double n = noisy.entries()[i].value - 0.5;
      acc2 += n * n;
    }
  }
  CHECK(std::sqrt(acc2 / (64.0 * reps)) == doctest::Approx(sigma).epsilon(0.02));
}

TEST_CASE("add_awgn identity paths") {
  SampleSet s(2, 1, {{{0, 0}, 0.2}, {{1, 0}, 0.8}});
  const SampleSet inf = add_awgn(s, std::numeric_limits<double>::infinity(), 3);
  CHECK(inf.entries() == s.entries());

  SampleSet zeros(2, 1, {{{0, 0}, 0.0}, {{1, 0}, 0.0}});
  const SampleSet still = add_awgn(zeros, 10.0, 3);
  CHECK(still.entries() == zeros.entries());

  CHECK_THROWS_AS(add_awgn(SampleSet(2, 2, {}), 10.0, 1), ConfigError);
}

TEST_CASE("noise sigma decreases with snr") {
  SampleSet s(4, 1, {{{0, 0}, 0.5}, {{1, 0}, 0.6}, {{2, 0}, 0.7}, {{3, 0}, 0.4}});
  double mean_sq = 0.0;
  for (const auto& e : s.entries()) mean_sq += e.value * e.value;
  mean_sq /= 4.0;
  double prev = HUGE_VAL;
  for (double snr : {0.0, 5.0, 10.0, 20.0, 40.0}) {
    const double sigma = std::sqrt(mean_sq / std::pow(10.0, snr / 10.0));
    REQUIRE(sigma < prev);
    prev = sigma;
  }
}

TEST_CASE("pgm round trip is bit-identical") {
  const std::string path = temp_path("tire_test_roundtrip.pgm");
  Grid g = random_grid(17, 9, 77);
  save_raster(g, path);
  const Grid loaded = load_raster(path);
  CHECK(loaded.width() == 17);
  CHECK(loaded.height() == 9);
  // loaded differs from quantize(g) by 0
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = std::floor(g.values()[i] * 255.0 + 0.5) / 255.0;
    REQUIRE(loaded.values()[i] == q);
  }
  const std::string path2 = temp_path("tire_test_roundtrip2.pgm");
  save_raster(loaded, path2);
  CHECK(file_bytes(path) == file_bytes(path2));
}

TEST_CASE("png round trip is bit-identical") {
  const std::string path = temp_path("tire_test_roundtrip.png");
  Grid g = random_grid(23, 11, 78);
  save_raster(g, path);
  const Grid loaded = load_raster(path);
  REQUIRE(loaded.width() == 23);
  REQUIRE(loaded.height() == 11);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = std::floor(g.values()[i] * 255.0 + 0.5) / 255.0;
    REQUIRE(loaded.values()[i] == q);
  }
  const std::string path2 = temp_path("tire_test_roundtrip2.png");
  save_raster(loaded, path2);
  CHECK(file_bytes(path) == file_bytes(path2));
}

TEST_CASE("pixel value mapping") {
  const std::string path = temp_path("tire_test_values.pgm");
  std::ofstream f(path);
  f << "P2\n3 1\n255\n255 0 128\n";
  f.close();
  const Grid g = load_raster(path);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 0) == 0.0);
  CHECK(g(2, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("png decoder handles filtered rows") {
  // A gradient image compresses with non-trivial filters in most encoders;
  // here we at least exercise all five filter types through our own unfilter
  // path by decoding a hand-built stream.
  const int w = 6, h = 5;
  std::vector<std::uint8_t> px(w * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) px[y * w + x] = static_cast<std::uint8_t>(x * 40 + y * 7);
  const auto bytes = detail::encode_png_gray8(w, h, px);
  int rw = 0, rh = 0;
  std::vector<std::uint8_t> out;
  detail::decode_png_gray8(bytes, rw, rh, out);
  CHECK(rw == w);
  CHECK(rh == h);
  CHECK(out == px);
}

TEST_CASE("raster error paths") {
  CHECK_THROWS_AS(load_raster(temp_path("missing_file.pgm")), DataError);
  CHECK_THROWS_AS(load_raster(temp_path("missing_file.xyz")), DataError);

  const std::string bad = temp_path("tire_test_bad.pgm");
  std::ofstream f(bad);
  f << "P5\n2 2\n255\n";
  f.close();
  CHECK_THROWS_AS(load_raster(bad), DataError);

  const std::string bad_max = temp_path("tire_test_badmax.pgm");
  std::ofstream g(bad_max);
  g << "P2\n2 1\n65535\n1 2\n";
  g.close();
  CHECK_THROWS_AS(load_raster(bad_max), DataError);

  const std::string trunc = temp_path("tire_test_trunc.png");
  std::ofstream t(trunc, std::ios::binary);
  t << "\x89PNG\r\n";
  t.close();
  CHECK_THROWS_AS(load_raster(trunc), DataError);
}

TEST_CASE("samples csv round trip") {
  SampleSet s(8, 8, {{{1, 2}, 0.25}, {{7, 0}, 1.0}, {{3, 3}, 0.1234567890123456}});
  const std::string path = temp_path("tire_test_samples.csv");
  save_samples_csv(s, path);
  const SampleSet back = load_samples_csv(path, 8, 8);
  CHECK(back.entries() == s.entries());

  const std::string bad = temp_path("tire_test_samples_bad.csv");
  std::ofstream f(bad);
  f << "a,b,c\n";
  f.close();
  CHECK_THROWS_AS(load_samples_csv(bad, 8, 8), DataError);
}

TEST_CASE("manifest round trip and validation") {
  DatasetManifest m;
  m.entries.push_back({"gain_0.pgm", "b_0.pgm", {{3, 4}}, "train"});
  m.entries.push_back({"gain_1.pgm", "b_1.pgm", {{1, 2}, {5, 6}}, "test"});
  m.normalization = DbNormalization{-120.0, -40.0};
  const std::string path = temp_path("tire_test_manifest.json");
  save_manifest(m, path);
  const DatasetManifest back = load_manifest(path);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].gain == "gain_0.pgm");
  CHECK(back.entries[1].tx.size() == 2);
  CHECK(back.entries[1].split == "test");
  REQUIRE(back.normalization.has_value());
  CHECK(back.normalization->lo_db == -120.0);

  const std::string bad = temp_path("tire_test_manifest_bad.json");
  std::ofstream f(bad);
  f << "{\"entries\":[{\"gain\":\"g\",\"buildings\":\"b\",\"tx\":[[0,0]],\"split\":\"nope\"}]}";
  f.close();
  CHECK_THROWS_AS(load_manifest(bad), DataError);

  const std::string unknown = temp_path("tire_test_manifest_unknown.json");
  std::ofstream u(unknown);
  u << "{\"entries\":[],\"surprise\":1}";
  u.close();
  CHECK_THROWS_AS(load_manifest(unknown), DataError);
}

TEST_CASE("split_dataset fractions") {
  DatasetManifest m;
  for (int i = 0; i < 20; ++i) {
    m.entries.push_back({"g" + std::to_string(i), "b", {{0, 0}}, "train"});
  }
  const DatasetManifest out = split_dataset(m, {0.7, 0.15, 0.15}, 5);
  int train = 0, val = 0, test = 0;
  for (const auto& e : out.entries) {
    train += e.split == "train";
    val += e.split == "val";
    test += e.split == "test";
  }
  CHECK(train == 14);
  CHECK(val == 3);
  CHECK(test == 3);

  const DatasetManifest again = split_dataset(m, {0.7, 0.15, 0.15}, 5);
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    REQUIRE(out.entries[i].split == again.entries[i].split);
  }

  CHECK_THROWS_AS(split_dataset(m, {0.5, 0.5, 0.1}, 5), ConfigError);
}

TEST_CASE("preprocess params validated") {
  PreprocessParams p;
  p.sampling_ratio = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.sampling_ratio = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.sampling_ratio = 0.5;
  p.low_threshold = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
