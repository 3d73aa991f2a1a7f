#include "tire/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tire/interp.hpp"
#include "tire/parallel.hpp"
#include "tire/rng.hpp"

namespace tire::eval {

using train::TrainDataset;
using train::TrainItem;

// ---------------------------------------------------------------------------
// Estimators

Estimator make_idw_estimator(double power) {
  return [power](const TrainItem& item) { return idw_interpolate(item.samples, power); };
}

Estimator make_kriging_estimator(int variogram_bins) {
  return [variogram_bins](const TrainItem& item) {
    const VariogramModel v = fit_variogram(item.samples, variogram_bins);
    return kriging_interpolate(item.samples, v).grid;
  };
}

Estimator make_passthrough_estimator() {
  return [](const TrainItem& item) { return item.truth; };
}

Estimator make_unet_estimator(std::shared_ptr<const nn::UNet> net, bool use_rdm) {
  return [net, use_rdm](const TrainItem& item) {
    return nn::tensor_to_grid(net->forward(train::make_condition(item, use_rdm)));
  };
}

Estimator make_tiregan_estimator(std::shared_ptr<const nn::Generator> gen) {
  return [gen](const TrainItem& item) {
    return nn::tensor_to_grid(gen->forward(train::make_condition(item, true)));
  };
}

OutagePredictor make_tin_predictor(std::shared_ptr<const nn::UNet> tin) {
  return [tin](const Grid& rm) {
    Grid clamped(rm.width(), rm.height());
    for (std::size_t i = 0; i < rm.size(); ++i) {
      clamped.values()[i] = std::clamp(rm.values()[i], 0.0, 1.0);
    }
    return nn::tensor_to_grid(tin->forward(nn::channels_to_tensor({&clamped})));
  };
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

metrics::MapMetrics map_metrics(const Grid& y, const Grid& y_hat, const BinaryGrid* mask,
                                double eps = 1.0 / 255.0) {
  if (mask == nullptr) {
    return {metrics::mse(y, y_hat), metrics::nmse(y, y_hat, eps), metrics::nmse_agg(y, y_hat)};
  }
  // Masked variants share the formulas but skip building pixels.
  double se = 0.0, nm = 0.0, num = 0.0, den = 0.0;
  std::size_t n = 0, n_nmse = 0;
  for (int y0 = 0; y0 < y.height(); ++y0) {
    for (int x0 = 0; x0 < y.width(); ++x0) {
      if (mask->get(x0, y0) != 0) continue;
      const double yi = y(x0, y0);
      const double d = yi - y_hat(x0, y0);
      se += d * d;
      num += d * d;
      den += yi * yi;
      ++n;
      if (yi >= eps) {
        nm += d * d / (yi * yi);
        ++n_nmse;
      }
    }
  }
  if (n == 0) throw NumericError("masked metrics: every pixel masked out");
  if (n_nmse == 0) throw NumericError("nmse: every pixel excluded by eps, metric undefined");
  if (den == 0.0) throw NumericError("nmse_agg: masked ground truth is all zero");
  return {se / static_cast<double>(n), nm / static_cast<double>(n_nmse), num / den};
}

}  // namespace

metrics::MetricReport evaluate_estimator(const TrainDataset& ds,
                                         const std::vector<std::size_t>& indices,
                                         const Estimator& est, bool mask_buildings,
                                         const std::string& config_echo) {
  if (indices.empty()) throw ConfigError("evaluate_estimator: no maps selected");
  metrics::MetricReport report;
  report.config_echo = config_echo;
  report.per_map.resize(indices.size());
  parallel_for(indices.size(), [&](std::size_t k) {
    const TrainItem& item = ds.items[indices[k]];
    const Grid estimate = est(item);
    report.per_map[k] = map_metrics(item.truth, estimate,
                                    mask_buildings ? &item.scene.buildings : nullptr);
  });
  report.finalize();
  return report;
}

std::vector<SweepRow> sweep_sampling(const TrainDataset& ds,
                                     const std::vector<std::size_t>& indices,
                                     const std::vector<std::pair<std::string, Estimator>>& estimators,
                                     const std::vector<double>& sr_list,
                                     const PreprocessParams& base, bool mask_buildings) {
  if (estimators.empty()) throw ConfigError("sweep_sampling: no estimators given");
  if (sr_list.empty()) throw ConfigError("sweep_sampling: empty sr list");
  std::vector<SweepRow> rows;
  TrainDataset scratch;
  scratch.grid_size = ds.grid_size;
  for (double sr : sr_list) {
    PreprocessParams prep = base;
    prep.sampling_ratio = sr;
    scratch.items.clear();
    std::vector<std::size_t> local;
    for (std::size_t idx : indices) {
      TrainItem copy = ds.items[idx];
      train::apply_sampling(copy, idx, prep);
      local.push_back(scratch.items.size());
      scratch.items.push_back(std::move(copy));
    }
    for (const auto& [name, est] : estimators) {
      const auto report = evaluate_estimator(scratch, local, est, mask_buildings, "");
      rows.push_back({name, sr, report.aggregate});
    }
  }
  return rows;
}

std::vector<SweepRow> sweep_noise(const TrainDataset& ds, const std::vector<std::size_t>& indices,
                                  const std::pair<std::string, Estimator>& estimator,
                                  const std::vector<double>& snr_list, const PreprocessParams& base,
                                  bool mask_buildings) {
  if (snr_list.empty()) throw ConfigError("sweep_noise: empty snr list");
  std::vector<SweepRow> rows;
  TrainDataset scratch;
  scratch.grid_size = ds.grid_size;
  for (double snr : snr_list) {
    PreprocessParams prep = base;
    if (std::isinf(snr) && snr > 0) {
      prep.noise_snr_db.reset();  // the no-noise row
    } else {
      prep.noise_snr_db = snr;
    }
    scratch.items.clear();
    std::vector<std::size_t> local;
    for (std::size_t idx : indices) {
      TrainItem copy = ds.items[idx];
      train::apply_sampling(copy, idx, prep);
      local.push_back(scratch.items.size());
      scratch.items.push_back(std::move(copy));
    }
    const auto report = evaluate_estimator(scratch, local, estimator.second, mask_buildings, "");
    rows.push_back({estimator.first, snr, report.aggregate});
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const char* x_name,
                     const std::vector<SweepRow>& rows) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write " + path);
  std::fprintf(f, "estimator,%s,mse,nmse,nmse_agg\n", x_name);
  for (const auto& r : rows) {
    std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g\n", r.estimator.c_str(), r.x, r.agg.mse,
                 r.agg.nmse, r.agg.nmse_agg);
  }
  std::fclose(f);
}

double evaluate_outage(const TrainDataset& ds, const std::vector<std::size_t>& indices,
                       const Estimator& est, const OutagePredictor& predictor, double threshold) {
  if (indices.empty()) throw ConfigError("evaluate_outage: no maps selected");
  const OutageParams params{threshold};
  std::vector<double> per_map(indices.size());
  parallel_for(indices.size(), [&](std::size_t k) {
    const TrainItem& item = ds.items[indices[k]];
    const Grid z = outage_map(item.truth, params);
    const Grid z_hat = predictor(est(item));
    per_map[k] = metrics::mse(z, z_hat);
  });
  double acc = 0.0;
  for (double v : per_map) acc += v;
  return acc / static_cast<double>(per_map.size());
}

// ---------------------------------------------------------------------------
// Config

void EvalConfig::validate() const {
  if (!dataset.synthetic && !dataset.manifest) {
    throw ConfigError("dataset needs either \"synthetic\" or \"manifest\"");
  }
  sampling.validate();
  rdm.validate();
  if (!(outage_threshold > 0.0 && outage_threshold < 1.0)) {
    throw ConfigError("outage_threshold must be in (0,1)");
  }
  if (split != "train" && split != "val" && split != "test") {
    throw ConfigError("split must be train|val|test");
  }
  if (!(idw_power > 0.0)) throw ConfigError("idw_power must be > 0");
  if (variogram_bins < 2) throw ConfigError("variogram_bins must be >= 2");
}

EvalConfig parse_eval_config(const nlohmann::json& j) {
  train::expect_keys(j,
                     {"dataset", "sampling", "rdm", "seed", "outage_threshold", "mask_buildings",
                      "use_rdm", "method", "methods", "idw_power", "variogram_bins", "checkpoint",
                      "tin_checkpoint", "generator", "tin", "snr_list", "sr_list", "split"},
                     "eval config");
  EvalConfig c;
  if (j.contains("dataset")) c.dataset = train::parse_dataset_spec(j.at("dataset"));
  if (j.contains("sampling")) c.sampling = train::parse_sampling_spec(j.at("sampling"));
  if (j.contains("rdm")) c.rdm = train::parse_rdm_spec(j.at("rdm"));
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("outage_threshold")) c.outage_threshold = j.at("outage_threshold").get<double>();
  if (j.contains("mask_buildings")) c.mask_buildings = j.at("mask_buildings").get<bool>();
  if (j.contains("use_rdm")) c.use_rdm = j.at("use_rdm").get<bool>();
  if (j.contains("method")) c.method = j.at("method").get<std::string>();
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("idw_power")) c.idw_power = j.at("idw_power").get<double>();
  if (j.contains("variogram_bins")) c.variogram_bins = j.at("variogram_bins").get<int>();
  if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("tin_checkpoint")) c.tin_checkpoint = j.at("tin_checkpoint").get<std::string>();
  if (j.contains("generator")) c.generator = train::parse_generator_spec(j.at("generator"));
  if (j.contains("tin")) c.tin = train::parse_tin_spec(j.at("tin"));
  if (j.contains("snr_list")) {
    for (const auto& v : j.at("snr_list")) {
      if (v.is_null()) {
        c.snr_list.push_back(std::nullopt);
      } else {
        c.snr_list.push_back(v.get<double>());
      }
    }
  }
  if (j.contains("sr_list")) c.sr_list = j.at("sr_list").get<std::vector<double>>();
  if (j.contains("split")) c.split = j.at("split").get<std::string>();
  c.validate();
  return c;
}

EvalConfig load_eval_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config parse error in " + path + ": " + e.what());
  }
  return parse_eval_config(j);
}

train::TrainDataset build_eval_dataset(const EvalConfig& cfg) {
  train::TrainConfig tc;
  tc.dataset = cfg.dataset;
  tc.sampling = cfg.sampling;
  tc.rdm = cfg.rdm;
  tc.seed = cfg.seed;
  tc.outage_threshold = cfg.outage_threshold;
  return train::build_dataset(tc);
}

const std::vector<std::size_t>& split_indices(const train::TrainDataset& ds,
                                              const std::string& split) {
  if (split == "train") return ds.train_idx;
  if (split == "val") return ds.val_idx;
  return ds.test_idx;
}

Estimator make_estimator(const EvalConfig& cfg, const std::string& method, int grid_size) {
  if (method == "idw") return make_idw_estimator(cfg.idw_power);
  if (method == "kriging") return make_kriging_estimator(cfg.variogram_bins);
  if (method == "passthrough") return make_passthrough_estimator();
  if (method == "unet") {
    if (cfg.checkpoint.empty()) throw ConfigError("unet estimator needs \"checkpoint\"");
    nn::TinConfig reg_cfg = cfg.tin;
    reg_cfg.in_channels = 4;
    reg_cfg.grid_size = grid_size;
    auto net = std::make_shared<nn::UNet>(reg_cfg, 0);
    net->load_state(ad::load_checkpoint(cfg.checkpoint));
    return make_unet_estimator(net, cfg.use_rdm);
  }
  if (method == "tiregan") {
    if (cfg.checkpoint.empty()) throw ConfigError("tiregan estimator needs \"checkpoint\"");
    nn::GeneratorConfig gen_cfg = cfg.generator;
    gen_cfg.grid_size = grid_size;
    auto gen = std::make_shared<nn::Generator>(gen_cfg, 0);
    gen->load_state(ad::load_checkpoint(cfg.checkpoint));
    return make_tiregan_estimator(gen);
  }
  throw ConfigError("unknown estimator \"" + method +
                    "\" (want idw|kriging|unet|tiregan|passthrough)");
}

}  // namespace tire::eval
