#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tire/dataset.hpp"
#include "tire/grid.hpp"
#include "tire/nn.hpp"
#include "tire/rdm.hpp"
#include "tire/scene.hpp"

namespace tire::train {

enum class GanLossVariant {
  nonsaturating,  // L_G = -mean log D(G(.)); default, does not saturate early
  paper_log1m,    // L_G = mean log(1 - D(G(.)))
};

struct SyntheticSpec {
  int n_scenes = 200;
  int size = 32;
  int buildings = 5;
  int n_tx = 1;
  std::uint64_t seed = 7;
  SimParams sim;
};

struct DatasetSpec {
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::string> manifest;
  std::array<double, 3> split{0.7, 0.15, 0.15};
  std::uint64_t split_seed = 0;
};

struct TrainConfig {
  double alpha = 1.0;
  double beta = 0.1;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double lr_tin = 3e-4;  // higher rates can slam the sigmoid head into saturation
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int steps = 200;
  int batch_size = 2;
  std::uint64_t seed = 1;
  double outage_threshold = 0.2;
  GanLossVariant gan_loss = GanLossVariant::nonsaturating;
  bool use_rdm = true;  // ablation switch for the regressor baseline
  DatasetSpec dataset;
  PreprocessParams sampling;
  RdmParams rdm;
  nn::GeneratorConfig generator;
  nn::DiscriminatorConfig discriminator;
  nn::TinConfig tin;
  std::string tin_checkpoint;
  std::string out_checkpoint;
  std::string report_csv;
  void validate() const;
};

TrainConfig parse_train_config(const nlohmann::json& j);  // unknown keys rejected
TrainConfig load_train_config(const std::string& path);

// Strict-parsing helpers shared with the evaluation config.
void expect_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                 const char* where);
DatasetSpec parse_dataset_spec(const nlohmann::json& j);
PreprocessParams parse_sampling_spec(const nlohmann::json& j);
RdmParams parse_rdm_spec(const nlohmann::json& j);
nn::GeneratorConfig parse_generator_spec(const nlohmann::json& j);
nn::DiscriminatorConfig parse_discriminator_spec(const nlohmann::json& j);
nn::TinConfig parse_tin_spec(const nlohmann::json& j);

// One scene with everything training and evaluation need, precomputed.
struct TrainItem {
  Scene scene;
  Grid truth;      // ground-truth radiomap y
  Grid outage;     // z = outage_map(y, threshold)
  SampleSet samples;
  Grid m_s;        // zero-padded observation grid
  Grid m_d;        // radio depth map
  Grid m_u;        // building mask as a dense channel
  Grid m_t;        // transmitter mask as a dense channel
};

struct TrainDataset {
  std::vector<TrainItem> items;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  int grid_size = 0;
};

TrainDataset build_dataset(const TrainConfig& cfg);

// (Re)draws an item's sparse observations: per-item seeded selection, the
// low-value threshold, optional AWGN, then the zero-padded observation grid.
// Training and the evaluation sweeps share this path so a sweep row at the
// base settings reproduces the training-time observations bit for bit.
void apply_sampling(TrainItem& item, std::size_t item_index, const PreprocessParams& base);

// [1,4,N,N] stacked condition channels (M_U, M_T, M_S, M_D); the depth-map
// channel is zeroed when use_rdm is false.
ad::Tensor make_condition(const TrainItem& item, bool use_rdm);

struct StepRecord {
  int step = 0;
  double l_g = 0.0, l_mse = 0.0, l_r = 0.0, l_d = 0.0, l = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> rows;
  void write_csv(const std::string& path) const;  // "step,L_G,L_MSE,L_R,L_D,L"
};

struct TinResult {
  nn::UNet net;
  TrainReport report;
};

// Minimizes MSE between the predicted and true outage maps on the train
// split; the returned network is frozen. Ignores alpha/beta entirely.
TinResult pretrain_tin(const TrainDataset& ds, const TrainConfig& cfg);

struct GanResult {
  nn::Generator generator;
  nn::PatchDiscriminator discriminator;
  TrainReport report;
};

// Alternating D/G steps. Generator loss L = L_G + alpha*L_MSE + beta*L_R where
// L_R feeds back through the frozen TIN; beta == 0 skips the TIN path
// entirely and must match a TIN-absent run bit for bit. tin may be null only
// when beta == 0 and must be frozen otherwise.
GanResult train_tiregan(const TrainDataset& ds, const nn::UNet* tin, const TrainConfig& cfg);

struct RegressorResult {
  nn::UNet net;
  TrainReport report;
};

// UNet trained with pure MSE from the 4 condition channels to the radiomap.
RegressorResult train_unet_regressor(const TrainDataset& ds, const TrainConfig& cfg);

}  // namespace tire::train
