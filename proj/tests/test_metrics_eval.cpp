#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tire/eval.hpp"
#include "tire/metrics.hpp"
#include "tire/rng.hpp"

using namespace tire;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

Grid random_grid(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Grid g(w, h);
  for (auto& v : g.values()) v = rng.unit();
  return g;
}

train::TrainConfig eval_base_config() {
  train::TrainConfig cfg;
  train::SyntheticSpec syn;
  syn.n_scenes = 10;
  syn.size = 16;
  syn.buildings = 2;
  syn.n_tx = 1;
  syn.seed = 21;
  syn.sim.wall_loss_db = 8.0;
  cfg.dataset.synthetic = syn;
  cfg.dataset.split = {0.2, 0.2, 0.6};  // most maps in test
  cfg.sampling.sampling_ratio = 0.05;
  cfg.sampling.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("mse examples and oracle") {
  const Grid a(2, 1, {0.0, 1.0});
  const Grid b(2, 1, {0.0, 0.0});
  CHECK(metrics::mse(a, a) == 0.0);
  CHECK(metrics::mse(a, b) == 0.5);
  CHECK_THROWS_AS(metrics::mse(a, Grid(3, 1)), ShapeError);

  const Grid y = random_grid(8, 8, 1);
  const Grid yh = random_grid(8, 8, 2);
  CHECK(std::abs(metrics::mse(y, yh) - oracle::naive_mse(y, yh)) <= 1e-15);
}

TEST_CASE("nmse examples and oracle") {
  const Grid y(2, 1, {1.0, 2.0});
  const Grid yh(2, 1, {0.0, 2.0});
  CHECK(metrics::nmse(y, y) == 0.0);
  CHECK(metrics::nmse(y, yh) == doctest::Approx(0.5).epsilon(1e-15));

  Grid with_zeros = random_grid(8, 8, 3);
  with_zeros(0, 0) = 0.0;
  with_zeros(3, 3) = 0.0;
  const Grid est = random_grid(8, 8, 4);
  const double eps = 1.0 / 255.0;
  CHECK(std::abs(metrics::nmse(with_zeros, est, eps) -
                 oracle::naive_nmse(with_zeros, est, eps)) <= 1e-12);

  CHECK_THROWS_AS(metrics::nmse(Grid(2, 2, 0.0), est, eps), ShapeError);
  CHECK_THROWS_AS(metrics::nmse(Grid(8, 8, 0.0), est, eps), NumericError);  // all excluded
}

TEST_CASE("nmse_agg") {
  const Grid y(2, 1, {1.0, 2.0});
  const Grid yh(2, 1, {0.0, 2.0});
  CHECK(metrics::nmse_agg(y, yh) == doctest::Approx(1.0 / 5.0).epsilon(1e-15));
  CHECK_THROWS_AS(metrics::nmse_agg(Grid(2, 2, 0.0), Grid(2, 2, 0.5)), NumericError);
}

TEST_CASE("display scaling factors are exact") {
  CHECK(metrics::display_mse(2.5e-4) == 2.5e-4 * 1e4);
  CHECK(metrics::display_nmse(0.0123) == 0.0123 * 1e2);
}

TEST_CASE("passthrough estimator scores zero on every metric") {
  const auto ds = train::build_dataset(eval_base_config());
  const auto report = eval::evaluate_estimator(ds, ds.test_idx, eval::make_passthrough_estimator(),
                                               false, "passthrough");
  for (const auto& m : report.per_map) {
    REQUIRE(m.mse == 0.0);
    REQUIRE(m.nmse == 0.0);
    REQUIRE(m.nmse_agg == 0.0);
  }
  CHECK(report.aggregate.mse == 0.0);
}

TEST_CASE("aggregate equals the mean of per-map metrics") {
  const auto ds = train::build_dataset(eval_base_config());
  const auto report =
      eval::evaluate_estimator(ds, ds.test_idx, eval::make_idw_estimator(2.0), false, "idw");
  metrics::MapMetrics want;
  for (const auto& m : report.per_map) {
    want.mse += m.mse;
    want.nmse += m.nmse;
    want.nmse_agg += m.nmse_agg;
  }
  const double n = static_cast<double>(report.per_map.size());
  CHECK(std::abs(report.aggregate.mse - want.mse / n) <= 1e-12);
  CHECK(std::abs(report.aggregate.nmse - want.nmse / n) <= 1e-12);
  CHECK(std::abs(report.aggregate.nmse_agg - want.nmse_agg / n) <= 1e-12);
  CHECK(report.map_count == report.per_map.size());
}

TEST_CASE("evaluation reports are byte-reproducible") {
  const auto ds = train::build_dataset(eval_base_config());
  const auto r1 =
      eval::evaluate_estimator(ds, ds.test_idx, eval::make_idw_estimator(2.0), false, "idw");
  const auto r2 =
      eval::evaluate_estimator(ds, ds.test_idx, eval::make_idw_estimator(2.0), false, "idw");
  const std::string pa = temp_path("tire_eval_a.csv");
  const std::string pb = temp_path("tire_eval_b.csv");
  r1.write_csv(pa);
  r2.write_csv(pb);
  CHECK(file_bytes(pa) == file_bytes(pb));
}

TEST_CASE("masked metrics skip building pixels") {
  const auto ds = train::build_dataset(eval_base_config());
  // All-zero estimate: unmasked and masked metrics differ when buildings
  // exist (building interiors are exactly zero in the truth).
  eval::Estimator zeros = [](const train::TrainItem& item) {
    return Grid(item.truth.width(), item.truth.height(), 0.0);
  };
  const auto masked = eval::evaluate_estimator(ds, ds.test_idx, zeros, true, "");
  const auto unmasked = eval::evaluate_estimator(ds, ds.test_idx, zeros, false, "");
  bool any_buildings = false;
  for (std::size_t idx : ds.test_idx) {
    any_buildings |= ds.items[idx].scene.buildings.count_ones() > 0;
  }
  REQUIRE(any_buildings);
  CHECK(masked.aggregate.mse > unmasked.aggregate.mse);  // zero-valued interiors were free hits
}

TEST_CASE("sweep_sampling row count and errors") {
  const auto ds = train::build_dataset(eval_base_config());
  std::vector<std::pair<std::string, eval::Estimator>> estimators{
      {"idw", eval::make_idw_estimator(2.0)},
      {"passthrough", eval::make_passthrough_estimator()},
  };
  const auto rows = eval::sweep_sampling(ds, ds.test_idx, estimators, {0.02, 0.05, 0.1},
                                         eval_base_config().sampling, false);
  CHECK(rows.size() == 6);  // 2 estimators x 3 ratios
  CHECK_THROWS_AS(
      eval::sweep_sampling(ds, ds.test_idx, {}, {0.05}, eval_base_config().sampling, false),
      ConfigError);
}

TEST_CASE("idw error decreases from sparse to dense sampling") {
  auto cfg = eval_base_config();
  cfg.dataset.synthetic->n_scenes = 24;
  const auto ds = train::build_dataset(cfg);
  std::vector<std::pair<std::string, eval::Estimator>> est{{"idw", eval::make_idw_estimator(2.0)}};
  const auto rows = eval::sweep_sampling(ds, ds.test_idx, est, {0.02, 0.25}, cfg.sampling, false);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].agg.mse <= rows[0].agg.mse);
}

TEST_CASE("idw at full sampling reproduces the map exactly") {
  auto cfg = eval_base_config();
  cfg.sampling.sampling_ratio = 1.0;
  const auto ds = train::build_dataset(cfg);
  const auto report =
      eval::evaluate_estimator(ds, ds.test_idx, eval::make_idw_estimator(2.0), false, "");
  CHECK(report.aggregate.mse == 0.0);
  CHECK(report.aggregate.nmse == 0.0);
}

TEST_CASE("sweep_noise at infinite SNR equals the no-noise evaluation bit for bit") {
  const auto cfg = eval_base_config();
  const auto ds = train::build_dataset(cfg);
  REQUIRE_FALSE(cfg.sampling.noise_snr_db.has_value());
  const auto base =
      eval::evaluate_estimator(ds, ds.test_idx, eval::make_idw_estimator(2.0), false, "");
  const auto rows = eval::sweep_noise(ds, ds.test_idx, {"idw", eval::make_idw_estimator(2.0)},
                                      {std::numeric_limits<double>::infinity(), 10.0, 0.0},
                                      cfg.sampling, false);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].agg.mse == base.aggregate.mse);
  CHECK(rows[0].agg.nmse == base.aggregate.nmse);
  CHECK(rows[0].agg.nmse_agg == base.aggregate.nmse_agg);
}

TEST_CASE("sweep csv format") {
  const auto ds = train::build_dataset(eval_base_config());
  std::vector<std::pair<std::string, eval::Estimator>> est{{"idw", eval::make_idw_estimator(2.0)}};
  const auto rows = eval::sweep_sampling(ds, ds.test_idx, est, {0.05}, eval_base_config().sampling,
                                         false);
  const std::string path = temp_path("tire_sweep.csv");
  eval::write_sweep_csv(path, "sr", rows);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "estimator,sr,mse,nmse,nmse_agg");
  int lines = 0;
  std::string line;
  while (std::getline(f, line)) lines += !line.empty();
  CHECK(lines == 1);
}

TEST_CASE("evaluate_outage with injected stubs") {
  const auto cfg = eval_base_config();
  const auto ds = train::build_dataset(cfg);
  const double threshold = 0.2;

  // Ground-truth passthrough + perfect thresholder: exact zero.
  eval::OutagePredictor perfect = [threshold](const Grid& rm) {
    return outage_map(rm, OutageParams{threshold});
  };
  CHECK(eval::evaluate_outage(ds, ds.test_idx, eval::make_passthrough_estimator(), perfect,
                              threshold) == 0.0);

  // All-zeros radiomap with an identity outage head: MSE equals mean of z^2.
  eval::Estimator zeros = [](const train::TrainItem& item) {
    return Grid(item.truth.width(), item.truth.height(), 0.0);
  };
  eval::OutagePredictor identity = [](const Grid& rm) { return rm; };
  double want = 0.0;
  for (std::size_t idx : ds.test_idx) {
    const Grid z = outage_map(ds.items[idx].truth, OutageParams{threshold});
    double acc = 0.0;
    for (double v : z.values()) acc += v * v;
    want += acc / static_cast<double>(z.size());
  }
  want /= static_cast<double>(ds.test_idx.size());
  CHECK(eval::evaluate_outage(ds, ds.test_idx, zeros, identity, threshold) ==
        doctest::Approx(want).epsilon(1e-15));

  // Deterministic across invocations.
  const double a = eval::evaluate_outage(ds, ds.test_idx, zeros, identity, threshold);
  const double b = eval::evaluate_outage(ds, ds.test_idx, zeros, identity, threshold);
  CHECK(a == b);
}

TEST_CASE("eval config parsing") {
  const nlohmann::json good = {
      {"dataset", {{"synthetic", {{"n_scenes", 4}, {"size", 16}, {"buildings", 1}, {"tx", 1}}}}},
      {"sampling", {{"sr", 0.05}}},
      {"method", "kriging"},
      {"variogram_bins", 10},
      {"sr_list", {0.01, 0.05}},
      {"snr_list", {nullptr, 10.0}},
  };
  const auto cfg = eval::parse_eval_config(good);
  CHECK(cfg.method == "kriging");
  CHECK(cfg.variogram_bins == 10);
  REQUIRE(cfg.snr_list.size() == 2);
  CHECK_FALSE(cfg.snr_list[0].has_value());
  CHECK(cfg.snr_list[1] == 10.0);

  nlohmann::json bad = good;
  bad["surprise"] = true;
  CHECK_THROWS_AS(eval::parse_eval_config(bad), ConfigError);

  CHECK_THROWS_AS(eval::make_estimator(cfg, "nonsense", 16), ConfigError);
  CHECK_THROWS_AS(eval::make_estimator(cfg, "unet", 16), ConfigError);  // missing checkpoint
}
