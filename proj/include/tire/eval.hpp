#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tire/metrics.hpp"
#include "tire/train.hpp"

namespace tire::eval {

// Maps one dataset item to a predicted radiomap.
using Estimator = std::function<Grid(const train::TrainItem&)>;
// Maps an estimated radiomap to a per-pixel outage probability map.
using OutagePredictor = std::function<Grid(const Grid&)>;

Estimator make_idw_estimator(double power);
// Fits the variogram per map on the item's own samples.
Estimator make_kriging_estimator(int variogram_bins);
// Returns the ground truth; identity estimator for protocol checks.
Estimator make_passthrough_estimator();
Estimator make_unet_estimator(std::shared_ptr<const nn::UNet> net, bool use_rdm);
Estimator make_tiregan_estimator(std::shared_ptr<const nn::Generator> gen);
// Runs the network on the (clamped to [0,1]) estimate.
OutagePredictor make_tin_predictor(std::shared_ptr<const nn::UNet> tin);

// Runs the estimator over the given items; per-map metrics plus their mean.
// mask_buildings restricts the metrics to non-building pixels.
metrics::MetricReport evaluate_estimator(const train::TrainDataset& ds,
                                         const std::vector<std::size_t>& indices,
                                         const Estimator& est, bool mask_buildings,
                                         const std::string& config_echo);

struct SweepRow {
  std::string estimator;
  double x = 0.0;  // sr, or snr_db (+inf for the no-noise row)
  metrics::MapMetrics agg;
};

// One row per (estimator, sr); observations are redrawn at each sr with the
// same per-item seeding as training.
std::vector<SweepRow> sweep_sampling(const train::TrainDataset& ds,
                                     const std::vector<std::size_t>& indices,
                                     const std::vector<std::pair<std::string, Estimator>>& estimators,
                                     const std::vector<double>& sr_list,
                                     const PreprocessParams& base, bool mask_buildings);

// One row per SNR at fixed sr; an infinite SNR reproduces the no-noise
// evaluation exactly.
std::vector<SweepRow> sweep_noise(const train::TrainDataset& ds,
                                  const std::vector<std::size_t>& indices,
                                  const std::pair<std::string, Estimator>& estimator,
                                  const std::vector<double>& snr_list, const PreprocessParams& base,
                                  bool mask_buildings);

void write_sweep_csv(const std::string& path, const char* x_name,
                     const std::vector<SweepRow>& rows);

// Mean over items of mse(predictor(estimate), outage_map(truth, threshold)).
double evaluate_outage(const train::TrainDataset& ds, const std::vector<std::size_t>& indices,
                       const Estimator& est, const OutagePredictor& predictor, double threshold);

// Evaluation configuration (shared by eval, sweep-sr, sweep-snr, eval-outage
// and estimate). Strict keys like the train config.
struct EvalConfig {
  train::DatasetSpec dataset;
  PreprocessParams sampling;
  RdmParams rdm;
  std::uint64_t seed = 1;
  double outage_threshold = 0.2;
  bool mask_buildings = false;
  bool use_rdm = true;
  std::string method = "idw";              // idw|kriging|unet|tiregan|passthrough
  std::vector<std::string> methods;        // sweep-sr; defaults to {method}
  double idw_power = 2.0;
  int variogram_bins = 12;
  std::string checkpoint;                  // unet/tiregan weights
  std::string tin_checkpoint;
  nn::GeneratorConfig generator;
  nn::TinConfig tin;
  std::vector<std::optional<double>> snr_list;  // nullopt = no noise
  std::vector<double> sr_list;
  std::string split = "test";              // which split to evaluate
  void validate() const;
};

EvalConfig parse_eval_config(const nlohmann::json& j);
EvalConfig load_eval_config(const std::string& path);

// Builds the dataset described by an eval config (training knobs defaulted).
train::TrainDataset build_eval_dataset(const EvalConfig& cfg);
const std::vector<std::size_t>& split_indices(const train::TrainDataset& ds,
                                              const std::string& split);

// Instantiates the estimator named by cfg.method (or `method`), loading
// checkpoints as needed.
Estimator make_estimator(const EvalConfig& cfg, const std::string& method, int grid_size);

}  // namespace tire::eval
