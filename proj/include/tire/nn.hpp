#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tire/grid.hpp"
#include "tire/tensor.hpp"

namespace tire::nn {

using NamedParams = std::vector<std::pair<std::string, ad::Tensor>>;

// ResNet-style conditional generator: two stride-2 conv encoders, a stack of
// residual blocks, two stride-2 transpose-conv decoders, sigmoid output.
// Input channels are the stacked (M_U, M_T, M_S, M_D).
struct GeneratorConfig {
  int grid_size = 32;
  int in_channels = 4;
  int base_width = 16;
  int n_resblocks = 2;  // full-scale configs use 6
  void validate() const;
};

// PatchGAN discriminator: four stride-2 conv blocks with leaky ReLU, then a
// 1-channel conv + sigmoid patch map of side N/2^n_blocks.
//
// Conditioning of the 3-channel input:
//   conditional   -- (M_U, M_D, candidate radiomap)
//   paper_literal -- two constant one-hot planes, real (1,0) / fake (0,1),
//                    plus the candidate radiomap
struct DiscriminatorConfig {
  int grid_size = 32;
  int in_channels = 3;
  int n_blocks = 4;
  int base_width = 16;
  enum class Conditioning { conditional, paper_literal };
  Conditioning mode = Conditioning::conditional;
  void validate() const;
};

// UNet with `depth` encoder and decoder blocks. Encoder blocks run
// convs_per_block 3x3 convs then a 2x2 max pool; decoder blocks run a 2x2
// transpose conv, the skip concatenation, then convs_per_block convs.
// Used both as the outage-segmentation network (in_channels 1) and as the
// direct radiomap regressor baseline (in_channels 4).
struct TinConfig {
  int grid_size = 32;
  int in_channels = 1;
  int base_width = 8;
  int depth = 4;
  int convs_per_block = 3;
  void validate() const;
};

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, std::uint64_t init_seed);
  // cond [B,4,N,N] with N divisible by 4 -> [B,1,N,N] in (0,1)
  ad::Tensor forward(const ad::Tensor& cond) const;
  const GeneratorConfig& config() const { return cfg_; }
  const NamedParams& named_params() const { return params_; }
  std::vector<ad::Tensor> params() const;
  std::size_t param_count() const;
  void load_state(const std::vector<ad::CheckpointEntry>& entries);

 private:
  GeneratorConfig cfg_;
  NamedParams params_;
};

class PatchDiscriminator {
 public:
  PatchDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t init_seed);
  // inp [B,3,N,N] with N divisible by 2^n_blocks -> patch map [B,1,N/2^k,N/2^k]
  ad::Tensor forward(const ad::Tensor& inp) const;
  const DiscriminatorConfig& config() const { return cfg_; }
  const NamedParams& named_params() const { return params_; }
  std::vector<ad::Tensor> params() const;
  std::size_t param_count() const;
  void load_state(const std::vector<ad::CheckpointEntry>& entries);

 private:
  DiscriminatorConfig cfg_;
  NamedParams params_;
};

class UNet {
 public:
  UNet(const TinConfig& cfg, std::uint64_t init_seed);
  // x [B,in_channels,N,N] with N divisible by 2^depth -> [B,1,N,N] in (0,1)
  ad::Tensor forward(const ad::Tensor& x) const;
  const TinConfig& config() const { return cfg_; }
  const NamedParams& named_params() const { return params_; }
  std::vector<ad::Tensor> params() const;
  std::size_t param_count() const;
  void load_state(const std::vector<ad::CheckpointEntry>& entries);
  void set_requires_grad(bool on);  // freezing a pre-trained network

 private:
  TinConfig cfg_;
  NamedParams params_;
};

// Closed-form parameter counts (see README "Model sizes"); the unit tests pin
// the live models against these to catch architecture drift.
std::size_t generator_param_count(const GeneratorConfig& cfg);
std::size_t discriminator_param_count(const DiscriminatorConfig& cfg);
std::size_t unet_param_count(const TinConfig& cfg);

// Assembles the 3-channel discriminator input for one conditioning mode.
// candidate is [B,1,N,N]; m_u/m_d are [B,1,N,N] (ignored in paper_literal mode).
ad::Tensor assemble_disc_input(DiscriminatorConfig::Conditioning mode, const ad::Tensor& candidate,
                               const ad::Tensor& m_u, const ad::Tensor& m_d, bool label_real);

// Stacks grids as the channels of a [1,C,H,W] constant tensor.
ad::Tensor channels_to_tensor(const std::vector<const Grid*>& channels);
// Extracts channel 0 of batch element b as a Grid.
Grid tensor_to_grid(const ad::Tensor& t, int batch_index = 0);

// Mean of all patch values: the discriminator's scalar score.
double patch_score(const ad::Tensor& patch_map);

// FNV-1a over the raw parameter bytes; used to assert frozenness.
std::uint64_t param_checksum(const NamedParams& params);

void save_model(const std::string& path, const NamedParams& params);

}  // namespace tire::nn
