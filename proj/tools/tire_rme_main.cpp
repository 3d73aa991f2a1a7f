// tire_rme: radiomap estimation toolkit CLI.
//
// Exit codes: 0 ok, 1 unexpected error, 2 config error, 3 data error,
// 4 numerical abort. TIRE_RME_THREADS caps worker threads.
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "tire/dataset.hpp"
#include "tire/eval.hpp"
#include "tire/interp.hpp"
#include "tire/rdm.hpp"
#include "tire/rng.hpp"
#include "tire/scene.hpp"
#include "tire/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SceneFile {
  std::string buildings;
  std::vector<tire::PixelCoord> tx;
};

SceneFile load_scene_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw tire::DataError("cannot open scene file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw tire::DataError("scene file parse error in " + path + ": " + e.what());
  }
  SceneFile s;
  s.buildings = j.at("buildings").get<std::string>();
  for (const auto& jt : j.at("tx")) s.tx.push_back({jt[0].get<int>(), jt[1].get<int>()});
  return s;
}

tire::Scene scene_from_file(const std::string& path) {
  const SceneFile sf = load_scene_file(path);
  const fs::path dir = fs::path(path).parent_path();
  const std::string bpath = (dir / sf.buildings).string();
  tire::Scene scene{tire::BinaryGrid::from_grid(tire::load_raster(bpath)), sf.tx, 0};
  scene.validate();
  return scene;
}

std::string num(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

int cmd_gen_data(int n_scenes, int size, int buildings, int n_tx, std::uint64_t seed,
                 const std::string& out_dir, const std::string& format,
                 const tire::SimParams& sim) {
  fs::create_directories(out_dir);
  tire::DatasetManifest manifest;
  for (int i = 0; i < n_scenes; ++i) {
    const tire::Scene scene =
        tire::random_scene(size, buildings, n_tx, tire::mix_seed(seed, static_cast<std::uint64_t>(i)));
    const tire::Grid gain = tire::simulate_radiomap(scene, sim);
    const std::string gain_name = "gain_" + num(i) + "." + format;
    const std::string bld_name = "buildings_" + num(i) + "." + format;
    tire::save_raster(gain, (fs::path(out_dir) / gain_name).string());
    tire::save_raster(scene.buildings.to_grid(), (fs::path(out_dir) / bld_name).string());

    json js;
    js["buildings"] = bld_name;
    json txs = json::array();
    for (const auto& t : scene.transmitters) txs.push_back({t.x, t.y});
    js["tx"] = txs;
    std::ofstream sf(fs::path(out_dir) / ("scene_" + num(i) + ".json"));
    sf << js.dump(2) << '\n';

    tire::ManifestEntry entry;
    entry.gain = gain_name;
    entry.buildings = bld_name;
    entry.tx = scene.transmitters;
    entry.split = "train";
    manifest.entries.push_back(std::move(entry));
  }
  manifest = tire::split_dataset(manifest, {0.7, 0.15, 0.15}, seed);
  tire::save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  std::printf("wrote %d scenes to %s\n", n_scenes, out_dir.c_str());
  return 0;
}

tire::train::TrainConfig load_train_config_checked(const std::string& path) {
  if (path.empty()) throw tire::ConfigError("--config is required");
  return tire::train::load_train_config(path);
}

const tire::nn::UNet* load_frozen_tin(const tire::train::TrainConfig& cfg,
                                      std::optional<tire::nn::UNet>& storage) {
  if (cfg.beta == 0.0) return nullptr;
  if (cfg.tin_checkpoint.empty()) {
    throw tire::ConfigError("beta > 0 requires \"tin_checkpoint\" in the config");
  }
  tire::nn::TinConfig tin_cfg = cfg.tin;
  tin_cfg.in_channels = 1;
  storage.emplace(tin_cfg, 0);
  storage->load_state(tire::ad::load_checkpoint(cfg.tin_checkpoint));
  storage->set_requires_grad(false);
  return &*storage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radiomap estimation toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate synthetic scenes, rasters and a manifest");
  int n_scenes = 20, size = 32, buildings = 5, n_tx = 1;
  std::uint64_t seed = 7;
  std::string out_dir, format = "pgm";
  tire::SimParams sim;
  gen->add_option("--n-scenes", n_scenes, "number of scenes");
  gen->add_option("--size", size, "grid side length");
  gen->add_option("--buildings", buildings, "buildings per scene");
  gen->add_option("--tx", n_tx, "transmitters per scene");
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--format", format, "raster format: pgm or png")
      ->check(CLI::IsMember({"pgm", "png"}));
  gen->add_option("--ref-power-db", sim.ref_power_db, "reference power at 1 px");
  gen->add_option("--gamma", sim.pathloss_exponent, "path loss exponent");
  gen->add_option("--wall-loss-db", sim.wall_loss_db, "per-wall-pixel loss");
  gen->add_option("--shadow-sigma-db", sim.shadow_sigma_db, "log-normal shadowing std");
  gen->add_option("--floor-db", sim.floor_db, "clamp floor");

  // rdm
  auto* rdm_cmd = app.add_subcommand("rdm", "render the radio depth map of a scene");
  std::string scene_path, rdm_out;
  tire::RdmParams rdm_params;
  rdm_cmd->add_option("--scene", scene_path, "scene JSON ({\"buildings\":raster,\"tx\":[[x,y],..]})")
      ->required();
  rdm_cmd->add_option("--lambda", rdm_params.lambda, "IDW decay exponent");
  rdm_cmd->add_option("--min-distance", rdm_params.min_distance, "distance clamp (px)");
  rdm_cmd->add_option("--out", rdm_out, "output raster (.pgm or .png)")->required();

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw sparse observations from a radiomap");
  std::string map_path, sample_out;
  double sr = 0.01, low_threshold = 0.0;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--map", map_path, "radiomap raster")->required();
  sample_cmd->add_option("--sr", sr, "sampling ratio in (0,1]");
  sample_cmd->add_option("--threshold", low_threshold, "drop observations below this");
  sample_cmd->add_option("--snr", snr_db, "additive Gaussian noise SNR in dB (default: none)");
  sample_cmd->add_option("--seed", sample_seed, "seed");
  sample_cmd->add_option("--out", sample_out, "output CSV")->required();

  // config-driven subcommands
  std::string config_path, out_path;
  auto add_config = [&config_path](CLI::App* c) {
    c->add_option("--config", config_path, "JSON config file")->required();
  };
  auto* pretrain_cmd = app.add_subcommand("pretrain-tin", "pre-train the outage network");
  add_config(pretrain_cmd);
  auto* train_cmd = app.add_subcommand("train", "adversarial training with the TIN feedback");
  add_config(train_cmd);
  auto* baseline_cmd = app.add_subcommand("train-baseline", "train the direct UNet regressor");
  add_config(baseline_cmd);

  auto* estimate_cmd = app.add_subcommand("estimate", "write per-map estimates for a split");
  std::string method = "idw", est_out_dir;
  estimate_cmd->add_option("--method", method, "idw|kriging|unet|tiregan|passthrough");
  estimate_cmd->add_option("--config", config_path, "JSON eval config")->required();
  estimate_cmd->add_option("--out", est_out_dir, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "metric report for one estimator");
  add_config(eval_cmd);
  eval_cmd->add_option("--out", out_path, "output CSV")->required();
  auto* sweep_sr_cmd = app.add_subcommand("sweep-sr", "metrics across sampling ratios");
  add_config(sweep_sr_cmd);
  sweep_sr_cmd->add_option("--out", out_path, "output CSV")->required();
  auto* sweep_snr_cmd = app.add_subcommand("sweep-snr", "metrics across observation SNRs");
  add_config(sweep_snr_cmd);
  sweep_snr_cmd->add_option("--out", out_path, "output CSV")->required();
  auto* outage_cmd = app.add_subcommand("eval-outage", "outage MSE through the pre-trained TIN");
  add_config(outage_cmd);
  outage_cmd->add_option("--out", out_path, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_data(n_scenes, size, buildings, n_tx, seed, out_dir, format, sim);
    }

    if (rdm_cmd->parsed()) {
      const tire::Scene scene = scene_from_file(scene_path);
      tire::save_raster(tire::radio_depth_map(scene, rdm_params), rdm_out);
      std::printf("wrote %s\n", rdm_out.c_str());
      return 0;
    }

    if (sample_cmd->parsed()) {
      const tire::Grid rm = tire::load_raster(map_path);
      tire::PreprocessParams prep;
      prep.sampling_ratio = sr;
      prep.low_threshold = low_threshold;
      prep.seed = sample_seed;
      tire::SampleSet samples = tire::sample_uniform(rm, prep);
      if (!(std::isinf(snr_db) && snr_db > 0)) {
        samples = tire::add_awgn(samples, snr_db, tire::mix_seed(sample_seed, 0xa3ULL));
      }
      tire::save_samples_csv(samples, sample_out);
      std::printf("wrote %zu samples to %s\n", samples.size(), sample_out.c_str());
      return 0;
    }

    if (pretrain_cmd->parsed()) {
      const auto cfg = load_train_config_checked(config_path);
      const auto ds = tire::train::build_dataset(cfg);
      auto result = tire::train::pretrain_tin(ds, cfg);
      if (!cfg.out_checkpoint.empty()) tire::nn::save_model(cfg.out_checkpoint, result.net.named_params());
      if (!cfg.report_csv.empty()) result.report.write_csv(cfg.report_csv);
      std::printf("tin pretraining done, final loss %.6g\n", result.report.rows.back().l);
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto cfg = load_train_config_checked(config_path);
      const auto ds = tire::train::build_dataset(cfg);
      std::optional<tire::nn::UNet> tin_storage;
      const tire::nn::UNet* tin = load_frozen_tin(cfg, tin_storage);
      auto result = tire::train::train_tiregan(ds, tin, cfg);
      if (!cfg.out_checkpoint.empty()) {
        tire::nn::save_model(cfg.out_checkpoint, result.generator.named_params());
      }
      if (!cfg.report_csv.empty()) result.report.write_csv(cfg.report_csv);
      std::printf("training done, final L %.6g\n", result.report.rows.back().l);
      return 0;
    }

    if (baseline_cmd->parsed()) {
      const auto cfg = load_train_config_checked(config_path);
      const auto ds = tire::train::build_dataset(cfg);
      auto result = tire::train::train_unet_regressor(ds, cfg);
      if (!cfg.out_checkpoint.empty()) tire::nn::save_model(cfg.out_checkpoint, result.net.named_params());
      if (!cfg.report_csv.empty()) result.report.write_csv(cfg.report_csv);
      std::printf("baseline training done, final loss %.6g\n", result.report.rows.back().l);
      return 0;
    }

    if (estimate_cmd->parsed()) {
      const auto cfg = tire::eval::load_eval_config(config_path);
      const auto ds = tire::eval::build_eval_dataset(cfg);
      const auto& idx = tire::eval::split_indices(ds, cfg.split);
      if (idx.empty()) throw tire::ConfigError("selected split is empty");
      const auto est = tire::eval::make_estimator(cfg, method, ds.grid_size);
      fs::create_directories(est_out_dir);
      auto report = tire::eval::evaluate_estimator(ds, idx, est, cfg.mask_buildings,
                                                   "method=" + method);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const tire::Grid estimate = est(ds.items[idx[k]]);
        tire::Grid clamped(estimate.width(), estimate.height());
        for (std::size_t i = 0; i < estimate.size(); ++i) {
          clamped.values()[i] = std::clamp(estimate.values()[i], 0.0, 1.0);
        }
        tire::save_raster(clamped, (fs::path(est_out_dir) / ("estimate_" + num(k) + ".pgm")).string());
      }
      report.write_csv((fs::path(est_out_dir) / "metrics.csv").string());
      std::printf("wrote %zu estimates to %s (mean mse %.6g)\n", idx.size(), est_out_dir.c_str(),
                  report.aggregate.mse);
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto cfg = tire::eval::load_eval_config(config_path);
      const auto ds = tire::eval::build_eval_dataset(cfg);
      const auto& idx = tire::eval::split_indices(ds, cfg.split);
      if (idx.empty()) throw tire::ConfigError("selected split is empty");
      const auto est = tire::eval::make_estimator(cfg, cfg.method, ds.grid_size);
      auto report = tire::eval::evaluate_estimator(ds, idx, est, cfg.mask_buildings,
                                                   "method=" + cfg.method);
      report.write_csv(out_path);
      std::printf("eval %s: mse %.6g (x1e-4: %.4f) nmse %.6g (x1e-2: %.4f)\n", cfg.method.c_str(),
                  report.aggregate.mse, tire::metrics::display_mse(report.aggregate.mse),
                  report.aggregate.nmse, tire::metrics::display_nmse(report.aggregate.nmse));
      return 0;
    }

    if (sweep_sr_cmd->parsed()) {
      const auto cfg = tire::eval::load_eval_config(config_path);
      if (cfg.sr_list.empty()) throw tire::ConfigError("sweep-sr needs \"sr_list\"");
      const auto ds = tire::eval::build_eval_dataset(cfg);
      const auto& idx = tire::eval::split_indices(ds, cfg.split);
      if (idx.empty()) throw tire::ConfigError("selected split is empty");
      std::vector<std::string> methods = cfg.methods.empty()
                                             ? std::vector<std::string>{cfg.method}
                                             : cfg.methods;
      if (methods.empty()) throw tire::ConfigError("sweep-sr needs at least one estimator");
      std::vector<std::pair<std::string, tire::eval::Estimator>> estimators;
      for (const auto& m : methods) {
        estimators.emplace_back(m, tire::eval::make_estimator(cfg, m, ds.grid_size));
      }
      const auto rows =
          tire::eval::sweep_sampling(ds, idx, estimators, cfg.sr_list, cfg.sampling, cfg.mask_buildings);
      tire::eval::write_sweep_csv(out_path, "sr", rows);
      std::printf("wrote %zu sweep rows to %s\n", rows.size(), out_path.c_str());
      return 0;
    }

    if (sweep_snr_cmd->parsed()) {
      const auto cfg = tire::eval::load_eval_config(config_path);
      if (cfg.snr_list.empty()) throw tire::ConfigError("sweep-snr needs \"snr_list\"");
      const auto ds = tire::eval::build_eval_dataset(cfg);
      const auto& idx = tire::eval::split_indices(ds, cfg.split);
      if (idx.empty()) throw tire::ConfigError("selected split is empty");
      std::vector<double> snrs;
      for (const auto& s : cfg.snr_list) {
        snrs.push_back(s ? *s : std::numeric_limits<double>::infinity());
      }
      const auto est = tire::eval::make_estimator(cfg, cfg.method, ds.grid_size);
      const auto rows = tire::eval::sweep_noise(ds, idx, {cfg.method, est}, snrs, cfg.sampling,
                                                cfg.mask_buildings);
      tire::eval::write_sweep_csv(out_path, "snr_db", rows);
      std::printf("wrote %zu sweep rows to %s\n", rows.size(), out_path.c_str());
      return 0;
    }

    if (outage_cmd->parsed()) {
      const auto cfg = tire::eval::load_eval_config(config_path);
      if (cfg.tin_checkpoint.empty()) throw tire::ConfigError("eval-outage needs \"tin_checkpoint\"");
      const auto ds = tire::eval::build_eval_dataset(cfg);
      const auto& idx = tire::eval::split_indices(ds, cfg.split);
      if (idx.empty()) throw tire::ConfigError("selected split is empty");
      const auto est = tire::eval::make_estimator(cfg, cfg.method, ds.grid_size);
      tire::nn::TinConfig tin_cfg = cfg.tin;
      tin_cfg.in_channels = 1;
      auto tin = std::make_shared<tire::nn::UNet>(tin_cfg, 0);
      tin->load_state(tire::ad::load_checkpoint(cfg.tin_checkpoint));
      const double outage_mse = tire::eval::evaluate_outage(
          ds, idx, est, tire::eval::make_tin_predictor(tin), cfg.outage_threshold);
      std::FILE* f = std::fopen(out_path.c_str(), "wb");
      if (!f) throw tire::DataError("cannot write " + out_path);
      std::fprintf(f, "estimator,outage_mse\n%s,%.17g\n", cfg.method.c_str(), outage_mse);
      std::fclose(f);
      std::printf("outage mse (%s): %.6g\n", cfg.method.c_str(), outage_mse);
      return 0;
    }
  } catch (const tire::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
