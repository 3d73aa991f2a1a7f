#include "tire/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "tire/rng.hpp"

namespace tire::train {

using ad::Tensor;

void TrainConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be >= 0");
  if (!(lr_g > 0.0 && lr_d > 0.0 && lr_tin > 0.0)) throw ConfigError("learning rates must be > 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(outage_threshold > 0.0 && outage_threshold < 1.0)) {
    throw ConfigError("outage_threshold must be in (0,1)");
  }
  if (!dataset.synthetic && !dataset.manifest) {
    throw ConfigError("dataset needs either \"synthetic\" or \"manifest\"");
  }
  if (dataset.synthetic && dataset.manifest) {
    throw ConfigError("dataset takes \"synthetic\" or \"manifest\", not both");
  }
  sampling.validate();
  rdm.validate();
  generator.validate();
  discriminator.validate();
  tin.validate();
}

// ---------------------------------------------------------------------------
// Config parsing

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

SimParams parse_sim(const json& j) {
  expect_keys(j, {"ref_power_db", "pathloss_exponent", "wall_loss_db", "shadow_sigma_db", "floor_db"},
              "sim");
  SimParams p;
  maybe(j, "ref_power_db", p.ref_power_db);
  maybe(j, "pathloss_exponent", p.pathloss_exponent);
  maybe(j, "wall_loss_db", p.wall_loss_db);
  maybe(j, "shadow_sigma_db", p.shadow_sigma_db);
  maybe(j, "floor_db", p.floor_db);
  return p;
}

}  // namespace

void expect_keys(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError(std::string("unknown key \"") + it.key() + "\" in " + where);
    }
  }
}

DatasetSpec parse_dataset_spec(const json& j) {
  expect_keys(j, {"synthetic", "manifest", "split", "split_seed"}, "dataset");
  DatasetSpec d;
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    expect_keys(s, {"n_scenes", "size", "buildings", "tx", "seed", "sim"}, "dataset.synthetic");
    SyntheticSpec spec;
    maybe(s, "n_scenes", spec.n_scenes);
    maybe(s, "size", spec.size);
    maybe(s, "buildings", spec.buildings);
    maybe(s, "tx", spec.n_tx);
    maybe(s, "seed", spec.seed);
    if (s.contains("sim")) spec.sim = parse_sim(s.at("sim"));
    d.synthetic = spec;
  }
  if (j.contains("manifest")) d.manifest = j.at("manifest").get<std::string>();
  if (j.contains("split")) {
    const auto v = j.at("split").get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError("dataset.split must be [train,val,test]");
    d.split = {v[0], v[1], v[2]};
  }
  maybe(j, "split_seed", d.split_seed);
  return d;
}

PreprocessParams parse_sampling_spec(const json& j) {
  expect_keys(j, {"sr", "low_threshold", "snr_db", "seed"}, "sampling");
  PreprocessParams p;
  maybe(j, "sr", p.sampling_ratio);
  maybe(j, "low_threshold", p.low_threshold);
  if (j.contains("snr_db") && !j.at("snr_db").is_null()) {
    p.noise_snr_db = j.at("snr_db").get<double>();
  }
  maybe(j, "seed", p.seed);
  return p;
}

RdmParams parse_rdm_spec(const json& j) {
  expect_keys(j, {"lambda", "min_distance"}, "rdm");
  RdmParams p;
  maybe(j, "lambda", p.lambda);
  maybe(j, "min_distance", p.min_distance);
  return p;
}

nn::GeneratorConfig parse_generator_spec(const json& j) {
  expect_keys(j, {"grid_size", "base_width", "n_resblocks"}, "generator");
  nn::GeneratorConfig c;
  maybe(j, "grid_size", c.grid_size);
  maybe(j, "base_width", c.base_width);
  maybe(j, "n_resblocks", c.n_resblocks);
  return c;
}

nn::DiscriminatorConfig parse_discriminator_spec(const json& j) {
  expect_keys(j, {"grid_size", "base_width", "n_blocks", "conditioning_mode"}, "discriminator");
  nn::DiscriminatorConfig c;
  maybe(j, "grid_size", c.grid_size);
  maybe(j, "base_width", c.base_width);
  maybe(j, "n_blocks", c.n_blocks);
  if (j.contains("conditioning_mode")) {
    const auto v = j.at("conditioning_mode").get<std::string>();
    if (v == "conditional") {
      c.mode = nn::DiscriminatorConfig::Conditioning::conditional;
    } else if (v == "paper_literal") {
      c.mode = nn::DiscriminatorConfig::Conditioning::paper_literal;
    } else {
      throw ConfigError("conditioning_mode must be conditional|paper_literal, got \"" + v + "\"");
    }
  }
  return c;
}

nn::TinConfig parse_tin_spec(const json& j) {
  expect_keys(j, {"grid_size", "base_width", "depth", "convs_per_block"}, "tin");
  nn::TinConfig c;
  maybe(j, "grid_size", c.grid_size);
  maybe(j, "base_width", c.base_width);
  maybe(j, "depth", c.depth);
  maybe(j, "convs_per_block", c.convs_per_block);
  return c;
}

TrainConfig parse_train_config(const json& j) {
  expect_keys(j,
              {"alpha", "beta", "lr_g", "lr_d", "lr_tin", "adam_beta1", "adam_beta2", "steps",
               "batch_size", "seed", "outage_threshold", "gan_loss_variant", "use_rdm", "dataset",
               "sampling", "rdm", "generator", "discriminator", "tin", "tin_checkpoint",
               "out_checkpoint", "report_csv"},
              "train config");
  TrainConfig c;
  maybe(j, "alpha", c.alpha);
  maybe(j, "beta", c.beta);
  maybe(j, "lr_g", c.lr_g);
  maybe(j, "lr_d", c.lr_d);
  maybe(j, "lr_tin", c.lr_tin);
  maybe(j, "adam_beta1", c.adam_beta1);
  maybe(j, "adam_beta2", c.adam_beta2);
  maybe(j, "steps", c.steps);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "seed", c.seed);
  maybe(j, "outage_threshold", c.outage_threshold);
  if (j.contains("gan_loss_variant")) {
    const auto v = j.at("gan_loss_variant").get<std::string>();
    if (v == "nonsaturating") {
      c.gan_loss = GanLossVariant::nonsaturating;
    } else if (v == "paper_log1m") {
      c.gan_loss = GanLossVariant::paper_log1m;
    } else {
      throw ConfigError("gan_loss_variant must be nonsaturating|paper_log1m, got \"" + v + "\"");
    }
  }
  maybe(j, "use_rdm", c.use_rdm);
  if (j.contains("dataset")) c.dataset = parse_dataset_spec(j.at("dataset"));
  if (j.contains("sampling")) c.sampling = parse_sampling_spec(j.at("sampling"));
  if (j.contains("rdm")) c.rdm = parse_rdm_spec(j.at("rdm"));
  if (j.contains("generator")) c.generator = parse_generator_spec(j.at("generator"));
  if (j.contains("discriminator")) c.discriminator = parse_discriminator_spec(j.at("discriminator"));
  if (j.contains("tin")) c.tin = parse_tin_spec(j.at("tin"));
  maybe(j, "tin_checkpoint", c.tin_checkpoint);
  maybe(j, "out_checkpoint", c.out_checkpoint);
  maybe(j, "report_csv", c.report_csv);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("config parse error in " + path + ": " + e.what());
  }
  return parse_train_config(j);
}

// ---------------------------------------------------------------------------
// Dataset assembly

namespace {

Grid tx_mask(const Scene& scene) {
  Grid m(scene.buildings.width(), scene.buildings.height());
  for (const auto& t : scene.transmitters) m(t.x, t.y) = 1.0;
  return m;
}

TrainItem make_item(Scene scene, Grid truth, const TrainConfig& cfg, std::size_t item_index) {
  TrainItem item{std::move(scene), std::move(truth), Grid(), SampleSet(), Grid(), Grid(), Grid(),
                 Grid()};
  item.outage = outage_map(item.truth, OutageParams{cfg.outage_threshold});
  apply_sampling(item, item_index, cfg.sampling);
  item.m_d = radio_depth_map(item.scene, cfg.rdm);
  item.m_u = item.scene.buildings.to_grid();
  item.m_t = tx_mask(item.scene);
  return item;
}

void split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed,
                   std::vector<std::size_t>& train, std::vector<std::size_t>& val,
                   std::vector<std::size_t>& test) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x59117ULL));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions[2] * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      train.push_back(order[i]);
    } else if (i < n_train + n_val) {
      val.push_back(order[i]);
    } else {
      test.push_back(order[i]);
    }
  }
}

}  // namespace

TrainDataset build_dataset(const TrainConfig& cfg) {
  cfg.validate();
  TrainDataset ds;
  if (cfg.dataset.synthetic) {
    const auto& spec = *cfg.dataset.synthetic;
    if (spec.n_scenes < 1) throw ConfigError("synthetic dataset needs n_scenes >= 1");
    spec.sim.validate();
    ds.grid_size = spec.size;
    for (int i = 0; i < spec.n_scenes; ++i) {
      Scene scene = random_scene(spec.size, spec.buildings, spec.n_tx,
                                 mix_seed(spec.seed, static_cast<std::uint64_t>(i)));
      Grid truth = simulate_radiomap(scene, spec.sim);
      ds.items.push_back(make_item(std::move(scene), std::move(truth), cfg,
                                   static_cast<std::size_t>(i)));
    }
    split_indices(ds.items.size(), cfg.dataset.split, cfg.dataset.split_seed, ds.train_idx,
                  ds.val_idx, ds.test_idx);
  } else {
    const DatasetManifest manifest = load_manifest(*cfg.dataset.manifest);
    if (manifest.entries.empty()) throw DataError("manifest has no entries");
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const auto& e = manifest.entries[i];
      Grid truth = load_raster(e.gain);
      BinaryGrid buildings = BinaryGrid::from_grid(load_raster(e.buildings));
      Scene scene{std::move(buildings), e.tx, mix_seed(cfg.seed, i)};
      if (ds.grid_size == 0) ds.grid_size = truth.width();
      if (truth.width() != ds.grid_size || truth.height() != ds.grid_size) {
        throw DataError("manifest rasters must share one square size");
      }
      ds.items.push_back(make_item(std::move(scene), std::move(truth), cfg, i));
      if (e.split == "train") {
        ds.train_idx.push_back(i);
      } else if (e.split == "val") {
        ds.val_idx.push_back(i);
      } else {
        ds.test_idx.push_back(i);
      }
    }
  }
  if (ds.train_idx.empty()) throw ConfigError("dataset split left the train set empty");
  return ds;
}

void apply_sampling(TrainItem& item, std::size_t item_index, const PreprocessParams& base) {
  PreprocessParams prep = base;
  prep.seed = mix_seed(base.seed, static_cast<std::uint64_t>(item_index));
  item.samples = sample_uniform(item.truth, prep);
  if (prep.noise_snr_db && !(std::isinf(*prep.noise_snr_db) && *prep.noise_snr_db > 0)) {
    item.samples = add_awgn(item.samples, *prep.noise_snr_db, mix_seed(prep.seed, 0xa3ULL));
  }
  item.m_s = to_observation_grid(item.samples);
}

ad::Tensor make_condition(const TrainItem& item, bool use_rdm) {
  if (use_rdm) {
    return nn::channels_to_tensor({&item.m_u, &item.m_t, &item.m_s, &item.m_d});
  }
  Grid zeros(item.m_d.width(), item.m_d.height());
  return nn::channels_to_tensor({&item.m_u, &item.m_t, &item.m_s, &zeros});
}

// ---------------------------------------------------------------------------
// Batching

namespace {

class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> indices, int batch, std::uint64_t seed)
      : indices_(std::move(indices)), batch_(static_cast<std::size_t>(batch)), seed_(seed) {
    reshuffle();
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    while (out.size() < batch_) {
      if (cursor_ >= indices_.size()) {
        ++epoch_;
        reshuffle();
      }
      out.push_back(indices_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    Rng rng(mix_seed(seed_, epoch_));
    for (std::size_t i = 0; i + 1 < indices_.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(indices_.size() - i));
      std::swap(indices_[i], indices_[j]);
    }
    cursor_ = 0;
  }

  std::vector<std::size_t> indices_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
};

Tensor batch_tensor(const TrainDataset& ds, const std::vector<std::size_t>& idx,
                    const std::function<Tensor(const TrainItem&)>& one) {
  const int n = static_cast<int>(idx.size());
  Tensor first = one(ds.items[idx[0]]);
  const auto& s = first.shape();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(n) * first.numel());
  data.insert(data.end(), first.values().begin(), first.values().end());
  for (int b = 1; b < n; ++b) {
    Tensor t = one(ds.items[idx[static_cast<std::size_t>(b)]]);
    if (t.shape() != s) throw ShapeError("batch_tensor: inconsistent item shapes");
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor::constant({n, s[1], s[2], s[3]}, std::move(data));
}

Tensor grid_channel(const Grid& g) { return nn::channels_to_tensor({&g}); }

void check_finite(double v, const char* what, int step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("numerical abort: ") + what + " is not finite at step " +
                       std::to_string(step));
  }
}

}  // namespace

void TrainReport::write_csv(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write report " + path);
  std::fputs("step,L_G,L_MSE,L_R,L_D,L\n", f);
  for (const auto& r : rows) {
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.l_g, r.l_mse, r.l_r, r.l_d,
                 r.l);
  }
  std::fclose(f);
}

// ---------------------------------------------------------------------------
// TIN pretraining

TinResult pretrain_tin(const TrainDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  nn::TinConfig tin_cfg = cfg.tin;
  tin_cfg.in_channels = 1;
  tin_cfg.grid_size = ds.grid_size;
  TinResult res{nn::UNet(tin_cfg, mix_seed(cfg.seed, 0x717ULL)), {}};

  auto params = res.net.params();
  ad::AdamState adam;
  BatchSampler sampler(ds.train_idx, cfg.batch_size, mix_seed(cfg.seed, 0x7ba7cULL));

  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = sampler.next();
    Tensor x = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.truth); });
    Tensor z = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.outage); });
    Tensor loss = ad::mse_loss(res.net.forward(x), z);
    const double l = loss.item();
    check_finite(l, "tin loss", step);
    ad::zero_grads(params);
    ad::backward(loss);
    ad::adam_step(params, adam, cfg.lr_tin, cfg.adam_beta1, cfg.adam_beta2);
    StepRecord rec;
    rec.step = step;
    rec.l_mse = l;
    rec.l = l;
    res.report.rows.push_back(rec);
  }
  res.net.set_requires_grad(false);  // frozen from here on
  return res;
}

// ---------------------------------------------------------------------------
// Adversarial training

GanResult train_tiregan(const TrainDataset& ds, const nn::UNet* tin, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.beta > 0.0) {
    if (tin == nullptr) throw ConfigError("beta > 0 requires a pre-trained TIN");
    for (const auto& [name, t] : tin->named_params()) {
      if (t.requires_grad()) throw ConfigError("TIN must be frozen before adversarial training");
    }
  }

  nn::GeneratorConfig gen_cfg = cfg.generator;
  gen_cfg.grid_size = ds.grid_size;
  nn::DiscriminatorConfig disc_cfg = cfg.discriminator;
  disc_cfg.grid_size = ds.grid_size;
  GanResult res{nn::Generator(gen_cfg, mix_seed(cfg.seed, 0x9e4ULL)),
                nn::PatchDiscriminator(disc_cfg, mix_seed(cfg.seed, 0xd15cULL)),
                {}};

  auto g_params = res.generator.params();
  auto d_params = res.discriminator.params();
  ad::AdamState g_adam, d_adam;
  BatchSampler sampler(ds.train_idx, cfg.batch_size, mix_seed(cfg.seed, 0xba7cULL));
  const auto mode = cfg.discriminator.mode;

  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = sampler.next();
    Tensor cond = batch_tensor(ds, idx, [](const TrainItem& it) { return make_condition(it, true); });
    Tensor y = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.truth); });
    Tensor z = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.outage); });
    Tensor m_u = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.m_u); });
    Tensor m_d = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.m_d); });

    // Discriminator step on real vs detached fake.
    Tensor fake = res.generator.forward(cond).detach();
    Tensor d_real = res.discriminator.forward(nn::assemble_disc_input(mode, y, m_u, m_d, true));
    Tensor d_fake = res.discriminator.forward(nn::assemble_disc_input(mode, fake, m_u, m_d, false));
    Tensor ones = Tensor::full(d_real.shape(), 1.0);
    Tensor zeros = Tensor::full(d_fake.shape(), 0.0);
    Tensor l_d = ad::scale(ad::add(ad::bce_loss(d_real, ones), ad::bce_loss(d_fake, zeros)), 0.5);
    const double l_d_val = l_d.item();
    check_finite(l_d_val, "discriminator loss", step);
    ad::zero_grads(d_params);
    ad::backward(l_d);
    ad::adam_step(d_params, d_adam, cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2);

    // Generator step; the candidate is presented to D with the "real" planes.
    Tensor y_hat = res.generator.forward(cond);
    Tensor d_on_fake =
        res.discriminator.forward(nn::assemble_disc_input(mode, y_hat, m_u, m_d, true));
    Tensor g_target = Tensor::full(d_on_fake.shape(), cfg.gan_loss == GanLossVariant::nonsaturating
                                                          ? 1.0
                                                          : 0.0);
    Tensor l_g = cfg.gan_loss == GanLossVariant::nonsaturating
                     ? ad::bce_loss(d_on_fake, g_target)
                     : ad::scale(ad::bce_loss(d_on_fake, g_target), -1.0);
    Tensor l_mse = ad::mse_loss(y_hat, y);
    Tensor total = ad::add(l_g, ad::scale(l_mse, cfg.alpha));
    double l_r_val = 0.0;
    if (cfg.beta != 0.0) {
      Tensor l_r = ad::mse_loss(tin->forward(y_hat), z);
      l_r_val = l_r.item();
      total = ad::add(total, ad::scale(l_r, cfg.beta));
    }
    const double l_val = total.item();
    check_finite(l_val, "generator loss", step);
    ad::zero_grads(g_params);
    ad::backward(total);
    ad::adam_step(g_params, g_adam, cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2);

    StepRecord rec;
    rec.step = step;
    rec.l_g = l_g.item();
    rec.l_mse = l_mse.item();
    rec.l_r = l_r_val;
    rec.l_d = l_d_val;
    rec.l = l_val;
    res.report.rows.push_back(rec);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Direct UNet regressor baseline

RegressorResult train_unet_regressor(const TrainDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  nn::TinConfig reg_cfg = cfg.tin;
  reg_cfg.in_channels = 4;
  reg_cfg.grid_size = ds.grid_size;
  RegressorResult res{nn::UNet(reg_cfg, mix_seed(cfg.seed, 0x4e6ULL)), {}};

  auto params = res.net.params();
  ad::AdamState adam;
  BatchSampler sampler(ds.train_idx, cfg.batch_size, mix_seed(cfg.seed, 0x4ba7cULL));
  const bool use_rdm = cfg.use_rdm;

  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = sampler.next();
    Tensor cond = batch_tensor(
        ds, idx, [use_rdm](const TrainItem& it) { return make_condition(it, use_rdm); });
    Tensor y = batch_tensor(ds, idx, [](const TrainItem& it) { return grid_channel(it.truth); });
    Tensor loss = ad::mse_loss(res.net.forward(cond), y);
    const double l = loss.item();
    check_finite(l, "regressor loss", step);
    ad::zero_grads(params);
    ad::backward(loss);
    ad::adam_step(params, adam, cfg.lr_tin, cfg.adam_beta1, cfg.adam_beta2);
    StepRecord rec;
    rec.step = step;
    rec.l_mse = l;
    rec.l = l;
    res.report.rows.push_back(rec);
  }
  return res;
}

}  // namespace tire::train
