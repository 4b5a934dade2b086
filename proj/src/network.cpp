#include "radarloc/network.hpp"

#include <cmath>
#include <stdexcept>

namespace radarloc::net {

namespace {

Tensor uniform_fan_in(const std::vector<int>& shape, int fan_in, Rng& rng) {
  Tensor t(shape);
  // He bound: anything smaller attenuates the signal geometrically with depth
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t k = 0; k < t.numel(); ++k) t[k] = rng.uniform(-s, s);
  return t;
}

struct DensePlan {
  int stem_ch, growth, layers_per_block, blocks;
};

DensePlan dense_plan(const std::string& preset) {
  if (preset == "desk") return {16, 8, 2, 4};
  if (preset == "paper") return {32, 16, 4, 4};
  throw std::invalid_argument("encoder: unknown preset " + preset);
}

std::vector<int> res_plan(const std::string& preset) {
  if (preset == "desk") return {16, 16, 32, 64, 128};  // stem then stages
  if (preset == "paper") return {32, 32, 64, 128, 256};
  throw std::invalid_argument("encoder: unknown preset " + preset);
}

}  // namespace

Encoder::Conv Encoder::add_conv(ParamStore& store, Rng& rng,
                                const std::string& name, int in_ch, int out_ch,
                                int k, int stride, int pad) {
  Conv c;
  c.stride = stride;
  c.pad = pad;
  c.wid = store.add(name + ".w",
                    uniform_fan_in({out_ch, in_ch, k, k}, in_ch * k * k, rng));
  c.bid = store.add(name + ".b", Tensor({out_ch}));
  return c;
}

Var Encoder::run_conv(Tape& t, const Conv& c, Var x) const {
  return ad::conv2d(t, x, t.param(*store_, c.wid), t.param(*store_, c.bid),
                    c.stride, c.pad);
}

Encoder::Encoder(const EncoderConfig& cfg, ParamStore& store, Rng& rng)
    : cfg_(cfg), store_(&store) {
  if (cfg_.feature_dim < 1)
    throw std::invalid_argument("encoder: feature_dim must be >= 1");
  if (cfg_.pool_grid < 1)
    throw std::invalid_argument("encoder: pool_grid must be >= 1");
  if (cfg_.variant == "dense") {
    const DensePlan plan = dense_plan(cfg_.preset);
    stem_ = add_conv(store, rng, "encoder.stem", 3, plan.stem_ch, 3, 2, 1);
    int ch = plan.stem_ch;
    for (int b = 0; b < plan.blocks; ++b) {
      std::vector<Conv> block;
      for (int l = 0; l < plan.layers_per_block; ++l) {
        block.push_back(add_conv(
            store, rng,
            "encoder.b" + std::to_string(b) + ".l" + std::to_string(l), ch,
            plan.growth, 3, 1, 1));
        ch += plan.growth;
      }
      dense_blocks_.push_back(std::move(block));
      if (b + 1 < plan.blocks) {
        const int half = ch / 2;
        transitions_.push_back(add_conv(
            store, rng, "encoder.t" + std::to_string(b), ch, half, 1, 1, 0));
        ch = half;
      }
    }
    backbone_out_ch_ = ch;
  } else if (cfg_.variant == "residual") {
    const std::vector<int> plan = res_plan(cfg_.preset);
    stem_ = add_conv(store, rng, "encoder.stem", 3, plan[0], 3, 2, 1);
    int ch = plan[0];
    for (std::size_t s = 1; s < plan.size(); ++s) {
      const int out = plan[s];
      const int stride = s == 1 ? 1 : 2;
      ResStage stage;
      const std::string base = "encoder.s" + std::to_string(s);
      stage.c1 = add_conv(store, rng, base + ".c1", ch, out, 3, stride, 1);
      stage.c2 = add_conv(store, rng, base + ".c2", out, out, 3, 1, 1);
      stage.has_proj = stride != 1 || ch != out;
      if (stage.has_proj)
        stage.proj = add_conv(store, rng, base + ".proj", ch, out, 1, stride, 0);
      res_stages_.push_back(stage);
      ch = out;
    }
    backbone_out_ch_ = ch;
  } else {
    throw std::invalid_argument("encoder: unknown variant " + cfg_.variant);
  }
  const int fc_in = backbone_out_ch_ * cfg_.pool_grid * cfg_.pool_grid;
  fc_wid = store.add("encoder.fc.w",
                     uniform_fan_in({cfg_.feature_dim, fc_in}, fc_in, rng));
  fc_bid = store.add("encoder.fc.b", Tensor({cfg_.feature_dim}));
}

Var Encoder::encode(Tape& t, Var image) const {
  const Tensor& in = t.value(image);
  if (in.ndim() != 3 || in.dim(0) != 1)
    throw std::invalid_argument("encode: input must be [1,H,W]");
  if (!in.all_finite())
    throw std::domain_error("encode: non-finite input");
  // The stem, transitions, and residual merges stay linear: every rectifier
  // sits on a branch with a concat or skip bypass, so no single saturated
  // layer can sever the input path and freeze the trunk into a constant.
  Var x = run_conv(t, stem_, ad::broadcast3(t, image));
  if (cfg_.variant == "dense") {
    for (std::size_t b = 0; b < dense_blocks_.size(); ++b) {
      for (const Conv& layer : dense_blocks_[b]) {
        Var h = ad::relu(t, run_conv(t, layer, x));
        x = ad::concat_channels(t, {x, h});
      }
      if (b < transitions_.size()) {
        x = ad::avgpool2(t, run_conv(t, transitions_[b], x));
      }
    }
  } else {
    for (const ResStage& s : res_stages_) {
      Var y = run_conv(t, s.c2, ad::relu(t, run_conv(t, s.c1, x)));
      Var sc = s.has_proj ? run_conv(t, s.proj, x) : x;
      x = ad::add(t, y, sc);
    }
  }
  Var z;
  if (cfg_.pool_grid == 1) {
    z = ad::global_avgpool(t, x);
  } else {
    while (t.value(x).dim(1) > cfg_.pool_grid &&
           t.value(x).dim(1) % 2 == 0 && t.value(x).dim(2) % 2 == 0)
      x = ad::avgpool2(t, x);
    if (t.value(x).dim(1) != cfg_.pool_grid ||
        t.value(x).dim(2) != cfg_.pool_grid)
      throw std::invalid_argument(
          "encode: backbone output " + std::to_string(t.value(x).dim(1)) +
          "x" + std::to_string(t.value(x).dim(2)) +
          " cannot pool to grid " + std::to_string(cfg_.pool_grid));
    z = ad::flatten(t, x);
  }
  return ad::linear(t, z, t.param(*store_, fc_wid), t.param(*store_, fc_bid));
}

Regressor::Fc Regressor::add_fc(ParamStore& store, Rng& rng,
                                const std::string& name, int in, int out) {
  Fc f;
  f.wid = store.add(name + ".w", uniform_fan_in({out, in}, in, rng));
  f.bid = store.add(name + ".b", Tensor({out}));
  return f;
}

Var Regressor::run_fc(Tape& t, const Fc& f, Var x) const {
  return ad::linear(t, x, t.param(*store_, f.wid), t.param(*store_, f.bid));
}

Regressor::Regressor(const RegressorConfig& cfg, int feature_dim,
                     ParamStore& store, Rng& rng)
    : cfg_(cfg), store_(&store) {
  if (cfg_.hidden_sizes.empty())
    throw std::invalid_argument("regressor: hidden_sizes must be nonempty");
  for (int h : cfg_.hidden_sizes)
    if (h < 1) throw std::invalid_argument("regressor: widths must be >= 1");
  if (cfg_.activation != "relu")
    throw std::invalid_argument("regressor: unsupported activation " +
                                cfg_.activation);
  const int trunk_out = cfg_.hidden_sizes[0];
  trunk_ = add_fc(store, rng, "regressor.trunk", feature_dim, trunk_out);
  for (const char* head : {"p", "w"}) {
    std::vector<Fc>& branch = head[0] == 'p' ? p_branch_ : w_branch_;
    int in = trunk_out;
    for (std::size_t i = 1; i < cfg_.hidden_sizes.size(); ++i) {
      branch.push_back(add_fc(store, rng,
                              std::string("regressor.") + head +
                                  std::to_string(i - 1),
                              in, cfg_.hidden_sizes[i]));
      in = cfg_.hidden_sizes[i];
    }
    branch.push_back(
        add_fc(store, rng, std::string("regressor.") + head + "_out", in, 3));
  }
}

Regressor::Heads Regressor::regress(Tape& t, Var z) const {
  if (!t.value(z).all_finite())
    throw std::domain_error("regress: non-finite input");
  Var h = ad::relu(t, run_fc(t, trunk_, z));
  auto run_branch = [&](const std::vector<Fc>& branch) {
    Var x = h;
    for (std::size_t i = 0; i + 1 < branch.size(); ++i)
      x = ad::relu(t, run_fc(t, branch[i], x));
    return run_fc(t, branch.back(), x);  // last layer stays linear
  };
  return {run_branch(p_branch_), run_branch(w_branch_)};
}

ModelConfig desk_model_config() {
  ModelConfig cfg;
  cfg.attention = {3, {8, 16, 32}, "relu"};
  cfg.attention_mode = attn::AttentionMode::full;
  cfg.encoder = {"dense", 256, "desk"};
  cfg.regressor = {{128, 64}, "relu"};
  return cfg;
}

ModelConfig paper_model_config() {
  ModelConfig cfg;
  cfg.attention = {6, {8, 16, 32, 64, 128, 256}, "relu"};
  cfg.attention_mode = attn::AttentionMode::full;
  cfg.encoder = {"dense", 1024, "paper", 1};
  cfg.regressor = {{512, 256}, "relu"};
  return cfg;
}

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  Rng base(init_seed);
  Rng r_attn = base.fork(1), r_enc = base.fork(2), r_reg = base.fork(3);
  attn_ = std::make_unique<attn::AttentionModule>(
      cfg_.attention, cfg_.attention_mode, store_, r_attn);
  encoder_ = std::make_unique<Encoder>(cfg_.encoder, store_, r_enc);
  regressor_ = std::make_unique<Regressor>(
      cfg_.regressor, cfg_.encoder.feature_dim, store_, r_reg);
}

Model::Forward Model::forward(Tape& t, Var image) const {
  Var masked = attn_->apply(t, image);
  Var z = encoder_->encode(t, masked);
  Regressor::Heads heads = regressor_->regress(t, z);
  return {heads.p, heads.w, masked};
}

Model::Forward Model::forward(Tape& t, const Tensor& image_hw) const {
  return forward(t, t.constant(to_network_input(image_hw)));
}

pose::LogPose Model::predict(const radar::CartesianImage& img,
                             ad::Exec exec) const {
  Tape t(exec);
  Forward f = forward(t, img.pixels);
  const Tensor& p = t.value(f.p);
  const Tensor& w = t.value(f.w);
  pose::LogPose lp;
  lp.p = {p[0], p[1], p[2]};
  lp.w = {w[0], w[1], w[2]};
  return lp;
}

Tensor to_network_input(const Tensor& image_hw) {
  if (image_hw.ndim() != 2)
    throw std::invalid_argument("to_network_input: expects [H,W]");
  if (!image_hw.all_finite())
    throw std::domain_error("to_network_input: non-finite image");
  Tensor out({1, image_hw.dim(0), image_hw.dim(1)});
  for (std::size_t i = 0; i < image_hw.numel(); ++i) out[i] = image_hw[i];
  return out;
}

}  // namespace radarloc::net
