#include "tire/nn.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>

#include "tire/rng.hpp"

namespace tire::nn {

using ad::Tensor;

namespace {

struct Conv {
  Tensor w, b;
  int stride = 1, pad = 1;
  Tensor operator()(const Tensor& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

struct TConv {
  Tensor w, b;
  int stride = 2, pad = 0;
  Tensor operator()(const Tensor& x) const { return ad::transpose_conv2d(x, w, b, stride, pad); }
};

// Registers parameters in construction order with Kaiming-uniform weights
// (U(-sqrt(6/fan_in), +sqrt(6/fan_in))) and zero biases.
class ParamBuilder {
 public:
  ParamBuilder(std::uint64_t seed, NamedParams& out) : rng_(mix_seed(seed, 0x1217ULL)), out_(out) {}

  Conv conv(const std::string& name, int cin, int cout, int k, int stride, int pad) {
    Conv c;
    c.w = weights(name + ".w", {cout, cin, k, k}, cin * k * k);
    c.b = zeros(name + ".b", {cout});
    c.stride = stride;
    c.pad = pad;
    return c;
  }

  TConv tconv(const std::string& name, int cin, int cout, int k, int stride, int pad) {
    TConv c;
    c.w = weights(name + ".w", {cin, cout, k, k}, cin * k * k);
    c.b = zeros(name + ".b", {cout});
    c.stride = stride;
    c.pad = pad;
    return c;
  }

 private:
  Tensor weights(const std::string& name, ad::Shape shape, int fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> v(ad::shape_numel(shape));
    for (auto& x : v) x = rng_.uniform(-bound, bound);
    Tensor t = Tensor::param(std::move(shape), std::move(v));
    out_.emplace_back(name, t);
    return t;
  }

  Tensor zeros(const std::string& name, ad::Shape shape) {
    Tensor t = Tensor::param(std::move(shape), std::vector<double>(ad::shape_numel(shape), 0.0));
    out_.emplace_back(name, t);
    return t;
  }

  Rng rng_;
  NamedParams& out_;
};

std::vector<Tensor> values_of(const NamedParams& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

std::size_t count_of(const NamedParams& named) {
  std::size_t n = 0;
  for (const auto& [name, t] : named) n += t.numel();
  return n;
}

void load_into(NamedParams& named, const std::vector<ad::CheckpointEntry>& entries,
               const char* what) {
  std::unordered_map<std::string, const ad::CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  if (by_name.size() != named.size()) {
    throw ConfigError(std::string(what) + ": checkpoint has " + std::to_string(by_name.size()) +
                      " tensors, model expects " + std::to_string(named.size()));
  }
  for (auto& [name, t] : named) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ConfigError(std::string(what) + ": checkpoint missing tensor " + name);
    }
    if (it->second->shape != t.shape()) {
      throw ConfigError(std::string(what) + ": tensor " + name + " shape " +
                        ad::shape_str(it->second->shape) + " does not match model " +
                        ad::shape_str(t.shape()));
    }
    t.values() = it->second->values;
  }
}

void check_square_input(const Tensor& x, int channels, int divisor, const char* what) {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != channels) {
    throw ShapeError(std::string(what) + ": want [B," + std::to_string(channels) +
                     ",N,N], got " + ad::shape_str(s));
  }
  if (s[2] != s[3] || s[2] % divisor != 0) {
    throw ShapeError(std::string(what) + ": spatial side must be square and divisible by " +
                     std::to_string(divisor) + ", got " + ad::shape_str(s));
  }
}

}  // namespace

// --- Generator ---------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (in_channels != 4) throw ConfigError("generator expects the 4 stacked condition channels");
  if (base_width < 1 || n_resblocks < 1) throw ConfigError("generator width/blocks must be >= 1");
  if (grid_size < 4 || grid_size % 4 != 0) throw ConfigError("generator grid size must be a positive multiple of 4");
}

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg.validate();
  ParamBuilder pb(init_seed, params_);
  const int w = cfg.base_width;
  pb.conv("gen.enc1", cfg.in_channels, w, 3, 2, 1);
  pb.conv("gen.enc2", w, 2 * w, 3, 2, 1);
  for (int r = 0; r < cfg.n_resblocks; ++r) {
    const std::string base = "gen.res" + std::to_string(r);
    pb.conv(base + ".c1", 2 * w, 2 * w, 3, 1, 1);
    pb.conv(base + ".c2", 2 * w, 2 * w, 3, 1, 1);
  }
  pb.tconv("gen.dec1", 2 * w, w, 2, 2, 0);
  pb.tconv("gen.dec2", w, 1, 2, 2, 0);
}

ad::Tensor Generator::forward(const Tensor& cond) const {
  check_square_input(cond, cfg_.in_channels, 4, "generator");
  // Rebind layer views onto the stored parameters (cheap shared handles).
  std::size_t i = 0;
  auto next_conv = [&](int stride, int pad) {
    Conv c{params_[i].second, params_[i + 1].second, stride, pad};
    i += 2;
    return c;
  };
  const Conv enc1 = next_conv(2, 1);
  const Conv enc2 = next_conv(2, 1);
  std::vector<std::pair<Conv, Conv>> res;
  for (int r = 0; r < cfg_.n_resblocks; ++r) {
    const Conv c1 = next_conv(1, 1);
    const Conv c2 = next_conv(1, 1);
    res.emplace_back(c1, c2);
  }
  TConv dec1{params_[i].second, params_[i + 1].second, 2, 0};
  i += 2;
  TConv dec2{params_[i].second, params_[i + 1].second, 2, 0};

  Tensor x = ad::relu(enc1(cond));
  x = ad::relu(enc2(x));
  for (const auto& [c1, c2] : res) {
    x = ad::add(x, c2(ad::relu(c1(x))));  // identity skip, activation inside the branch
  }
  x = ad::relu(dec1(x));
  return ad::sigmoid(dec2(x));
}

std::vector<Tensor> Generator::params() const { return values_of(params_); }
std::size_t Generator::param_count() const { return count_of(params_); }
void Generator::load_state(const std::vector<ad::CheckpointEntry>& e) {
  load_into(params_, e, "generator");
}

std::size_t generator_param_count(const GeneratorConfig& cfg) {
  const std::size_t w = static_cast<std::size_t>(cfg.base_width);
  const std::size_t r = static_cast<std::size_t>(cfg.n_resblocks);
  const std::size_t c0 = static_cast<std::size_t>(cfg.in_channels);
  std::size_t total = 9 * c0 * w + w;        // enc1
  total += 18 * w * w + 2 * w;               // enc2
  total += r * (72 * w * w + 4 * w);         // residual branches
  total += 8 * w * w + w;                    // dec1 (k2 transpose)
  total += 4 * w + 1;                        // dec2 (k2 transpose)
  return total;
}

// --- PatchGAN discriminator ---------------------------------------------------

void DiscriminatorConfig::validate() const {
  if (in_channels != 3) throw ConfigError("discriminator expects 3 input channels");
  if (n_blocks < 1) throw ConfigError("discriminator needs at least 1 block");
  if (base_width < 1) throw ConfigError("discriminator width must be >= 1");
}

PatchDiscriminator::PatchDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  cfg.validate();
  ParamBuilder pb(init_seed, params_);
  int cin = cfg.in_channels;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const int cout = cfg.base_width << b;
    pb.conv("disc.b" + std::to_string(b), cin, cout, 3, 2, 1);
    cin = cout;
  }
  pb.conv("disc.head", cin, 1, 3, 1, 1);
}

ad::Tensor PatchDiscriminator::forward(const Tensor& inp) const {
  check_square_input(inp, cfg_.in_channels, 1 << cfg_.n_blocks, "discriminator");
  Tensor x = inp;
  std::size_t i = 0;
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    Conv c{params_[i].second, params_[i + 1].second, 2, 1};
    i += 2;
    x = ad::leaky_relu(c(x), 0.2);
  }
  Conv head{params_[i].second, params_[i + 1].second, 1, 1};
  return ad::sigmoid(head(x));
}

std::vector<Tensor> PatchDiscriminator::params() const { return values_of(params_); }
std::size_t PatchDiscriminator::param_count() const { return count_of(params_); }
void PatchDiscriminator::load_state(const std::vector<ad::CheckpointEntry>& e) {
  load_into(params_, e, "discriminator");
}

std::size_t discriminator_param_count(const DiscriminatorConfig& cfg) {
  const std::size_t w = static_cast<std::size_t>(cfg.base_width);
  std::size_t total = 0;
  std::size_t cin = static_cast<std::size_t>(cfg.in_channels);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::size_t cout = w << b;
    total += 9 * cin * cout + cout;
    cin = cout;
  }
  total += 9 * cin + 1;  // head
  return total;
}

// --- UNet ----------------------------------------------------------------------

void TinConfig::validate() const {
  if (in_channels < 1) throw ConfigError("unet needs at least 1 input channel");
  if (base_width < 1) throw ConfigError("unet width must be >= 1");
  if (depth < 1) throw ConfigError("unet depth must be >= 1");
  if (convs_per_block < 1) throw ConfigError("unet convs_per_block must be >= 1");
}

UNet::UNet(const TinConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg.validate();
  ParamBuilder pb(init_seed, params_);
  int cin = cfg.in_channels;
  for (int d = 0; d < cfg.depth; ++d) {
    const int m = cfg.base_width << d;
    for (int c = 0; c < cfg.convs_per_block; ++c) {
      pb.conv("tin.enc" + std::to_string(d) + ".c" + std::to_string(c), c == 0 ? cin : m, m, 3, 1,
              1);
    }
    cin = m;
  }
  for (int d = 0; d < cfg.depth; ++d) {
    const int t = cfg.base_width << (cfg.depth - 1 - d);
    pb.tconv("tin.dec" + std::to_string(d) + ".up", cin, t, 2, 2, 0);
    for (int c = 0; c < cfg.convs_per_block; ++c) {
      pb.conv("tin.dec" + std::to_string(d) + ".c" + std::to_string(c), c == 0 ? 2 * t : t, t, 3,
              1, 1);
    }
    cin = t;
  }
  pb.conv("tin.head", cfg.base_width, 1, 3, 1, 1);
}

ad::Tensor UNet::forward(const Tensor& input) const {
  check_square_input(input, cfg_.in_channels, 1 << cfg_.depth, "unet");
  std::size_t i = 0;
  auto next_conv = [&](int stride, int pad) {
    Conv c{params_[i].second, params_[i + 1].second, stride, pad};
    i += 2;
    return c;
  };

  // Leaky activations; plain relu blocks die wholesale on mostly-dark targets
  // and freeze the net at a constant sigmoid(bias) output.
  Tensor x = input;
  std::vector<Tensor> skips;
  for (int d = 0; d < cfg_.depth; ++d) {
    for (int c = 0; c < cfg_.convs_per_block; ++c) x = ad::leaky_relu(next_conv(1, 1)(x), 0.01);
    skips.push_back(x);
    x = ad::max_pool2d(x);
  }
  for (int d = 0; d < cfg_.depth; ++d) {
    TConv up{params_[i].second, params_[i + 1].second, 2, 0};
    i += 2;
    x = up(x);
    x = ad::concat_channels(x, skips[static_cast<std::size_t>(cfg_.depth - 1 - d)]);
    for (int c = 0; c < cfg_.convs_per_block; ++c) x = ad::leaky_relu(next_conv(1, 1)(x), 0.01);
  }
  return ad::sigmoid(next_conv(1, 1)(x));
}

std::vector<Tensor> UNet::params() const { return values_of(params_); }
std::size_t UNet::param_count() const { return count_of(params_); }
void UNet::load_state(const std::vector<ad::CheckpointEntry>& e) { load_into(params_, e, "unet"); }

void UNet::set_requires_grad(bool on) {
  for (auto& [name, t] : params_) {
    // Recreate the leaf with the flag flipped; handles stay shared via values.
    if (t.requires_grad() == on) continue;
    Tensor fresh = on ? Tensor::param(t.shape(), t.values()) : t.detach();
    t = fresh;
  }
}

std::size_t unet_param_count(const TinConfig& cfg) {
  const std::size_t w = static_cast<std::size_t>(cfg.base_width);
  const std::size_t cpb = static_cast<std::size_t>(cfg.convs_per_block);
  std::size_t total = 0;
  std::size_t cin = static_cast<std::size_t>(cfg.in_channels);
  for (int d = 0; d < cfg.depth; ++d) {
    const std::size_t m = w << d;
    total += 9 * cin * m + m;                  // first conv
    total += (cpb - 1) * (9 * m * m + m);      // remaining convs
    cin = m;
  }
  for (int d = 0; d < cfg.depth; ++d) {
    const std::size_t t = w << (cfg.depth - 1 - d);
    total += 4 * cin * t + t;                  // k2 transpose conv
    total += 9 * 2 * t * t + t;                // conv after concat
    total += (cpb - 1) * (9 * t * t + t);
    cin = t;
  }
  total += 9 * w + 1;  // head
  return total;
}

// --- Shared helpers --------------------------------------------------------------

ad::Tensor assemble_disc_input(DiscriminatorConfig::Conditioning mode, const Tensor& candidate,
                               const Tensor& m_u, const Tensor& m_d, bool label_real) {
  const auto& s = candidate.shape();
  if (s.size() != 4 || s[1] != 1) {
    throw ShapeError("assemble_disc_input: candidate must be [B,1,N,N], got " + ad::shape_str(s));
  }
  if (mode == DiscriminatorConfig::Conditioning::paper_literal) {
    Tensor plane_real = Tensor::full(s, label_real ? 1.0 : 0.0);
    Tensor plane_fake = Tensor::full(s, label_real ? 0.0 : 1.0);
    return ad::concat_channels(ad::concat_channels(plane_real, plane_fake), candidate);
  }
  return ad::concat_channels(ad::concat_channels(m_u, m_d), candidate);
}

ad::Tensor channels_to_tensor(const std::vector<const Grid*>& channels) {
  if (channels.empty()) throw ShapeError("channels_to_tensor: no channels");
  const int h = channels[0]->height(), w = channels[0]->width();
  std::vector<double> data;
  data.reserve(channels.size() * static_cast<std::size_t>(h) * w);
  for (const Grid* g : channels) {
    if (g->height() != h || g->width() != w) {
      throw ShapeError("channels_to_tensor: channel size mismatch");
    }
    data.insert(data.end(), g->values().begin(), g->values().end());
  }
  return Tensor::constant({1, static_cast<int>(channels.size()), h, w}, std::move(data));
}

Grid tensor_to_grid(const Tensor& t, int batch_index) {
  const auto& s = t.shape();
  if (s.size() != 4) throw ShapeError("tensor_to_grid: want NCHW, got " + ad::shape_str(s));
  const int h = s[2], w = s[3];
  const std::size_t off =
      static_cast<std::size_t>(batch_index) * s[1] * h * w;  // channel 0 of element b
  std::vector<double> v(t.values().begin() + off, t.values().begin() + off + static_cast<std::size_t>(h) * w);
  return Grid(w, h, std::move(v));
}

double patch_score(const Tensor& patch_map) {
  double acc = 0.0;
  for (double v : patch_map.values()) acc += v;
  return acc / static_cast<double>(patch_map.numel());
}

std::uint64_t param_checksum(const NamedParams& params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, t] : params) {
    mix(name.data(), name.size());
    mix(t.values().data(), t.values().size() * sizeof(double));
  }
  return h;
}

void save_model(const std::string& path, const NamedParams& params) {
  ad::save_checkpoint(path, params);
}

}  // namespace tire::nn
