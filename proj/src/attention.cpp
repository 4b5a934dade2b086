#include "radarloc/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace radarloc::attn {

AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "full") return AttentionMode::full;
  if (s == "plain" || s == "plain-encoder-decoder")
    return AttentionMode::plain_encoder_decoder;
  if (s == "off") return AttentionMode::off;
  throw std::invalid_argument("unknown attention mode: " + s);
}

std::string to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::full: return "full";
    case AttentionMode::plain_encoder_decoder: return "plain";
    case AttentionMode::off: return "off";
  }
  return "?";
}

namespace {

Tensor uniform_fan_in(const std::vector<int>& shape, int fan_in, Rng& rng) {
  Tensor t(shape);
  // He bound: anything smaller attenuates the signal geometrically with depth
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t k = 0; k < t.numel(); ++k) t[k] = rng.uniform(-s, s);
  return t;
}

}  // namespace

int AttentionModule::channels_at(int level) const {
  return level == 0 ? 1 : cfg_.channel_widths[level];
}

const AttentionModule::NodeSpec& AttentionModule::spec(int i, int j) const {
  for (const NodeSpec& s : specs_)
    if (s.i == i && s.j == j) return s;
  throw std::logic_error("attention: no node (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
}

AttentionModule::AttentionModule(const AttentionConfig& cfg, AttentionMode mode,
                                 ParamStore& store, Rng& rng)
    : cfg_(cfg), mode_(mode), store_(&store) {
  if (mode_ == AttentionMode::off) return;
  const int n = cfg_.levels;
  if (n < 2) throw std::invalid_argument("attention: levels must be >= 2");
  if (static_cast<int>(cfg_.channel_widths.size()) != n)
    throw std::invalid_argument("attention: need one channel width per level");
  for (int w : cfg_.channel_widths)
    if (w < 1) throw std::invalid_argument("attention: widths must be >= 1");
  if (cfg_.activation != "relu")
    throw std::invalid_argument("attention: unsupported activation " +
                                cfg_.activation);

  const bool plain = mode_ == AttentionMode::plain_encoder_decoder;
  auto add_node = [&](int i, int j, int in_ch) {
    NodeSpec s;
    s.i = i;
    s.j = j;
    s.in_ch = in_ch;
    s.out_ch = channels_at(i);
    s.stride = (j == 0 && i > 0) ? 2 : 1;
    s.activated = i > 0;
    const std::string base =
        "attn.x" + std::to_string(i) + "_" + std::to_string(j);
    s.wid = store.add(base + ".w",
                      uniform_fan_in({s.out_ch, in_ch, 3, 3}, in_ch * 9, rng));
    s.bid = store.add(base + ".b", Tensor({s.out_ch}));
    specs_.push_back(s);
  };

  for (int i = 0; i < n; ++i)
    add_node(i, 0, i == 0 ? 1 : channels_at(i - 1));
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i + j <= n - 1; ++i) {
      if (plain && i + j != n - 1) continue;
      const int skips = plain ? 1 : j;
      add_node(i, j, skips * channels_at(i) + channels_at(i + 1));
    }
  }
}

NodeGrid AttentionModule::build_node_grid(Tape& t, Var input) const {
  if (mode_ == AttentionMode::off)
    throw std::logic_error("attention: no node grid in off mode");
  const Tensor& in = t.value(input);
  if (in.ndim() != 3 || in.dim(0) != 1)
    throw std::invalid_argument("attention: input must be [1,H,W]");
  const int n = cfg_.levels;
  const int div = 1 << (n - 1);
  if (in.dim(1) % div != 0 || in.dim(2) % div != 0)
    throw std::invalid_argument(
        "attention: input spatial dims must be divisible by 2^(levels-1)");

  const bool plain = mode_ == AttentionMode::plain_encoder_decoder;
  NodeGrid grid;
  grid.levels = n;
  auto conv_node = [&](const NodeSpec& s, Var x) {
    Var y = ad::conv2d(t, x, t.param(*store_, s.wid), t.param(*store_, s.bid),
                       s.stride, 1);
    return s.activated ? ad::relu(t, y) : y;
  };

  Var prev = input;
  for (int i = 0; i < n; ++i) {
    Var x = conv_node(spec(i, 0), prev);
    grid.nodes[{i, 0}] = x;
    prev = x;
  }
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i + j <= n - 1; ++i) {
      if (plain && i + j != n - 1) continue;
      std::vector<Var> parts;
      if (plain) {
        parts.push_back(grid.at(i, 0));
      } else {
        for (int k = 0; k < j; ++k) parts.push_back(grid.at(i, k));
      }
      const int jprev = plain ? (n - 2 - i) : (j - 1);
      parts.push_back(ad::upsample_nearest2(t, grid.at(i + 1, jprev)));
      grid.nodes[{i, j}] = conv_node(spec(i, j), ad::concat_channels(t, parts));
    }
  }
  return grid;
}

Var AttentionModule::fuse_top_level(Tape& t, const NodeGrid& grid) const {
  if (mode_ == AttentionMode::off)
    throw std::logic_error("attention: no fusion in off mode");
  const int n = cfg_.levels;
  if (mode_ == AttentionMode::plain_encoder_decoder)
    return grid.at(0, n - 1);
  std::vector<Var> tops;
  for (int j = 0; j < n; ++j) tops.push_back(grid.at(0, j));
  return ad::mean_of(t, tops);
}

Var AttentionModule::apply(Tape& t, Var image) const {
  if (mode_ == AttentionMode::off) return image;
  NodeGrid grid = build_node_grid(t, image);
  return apply_attention(t, image, fuse_top_level(t, grid));
}

Var apply_attention(Tape& t, Var image, Var logits) {
  if (!t.value(image).same_shape(t.value(logits)))
    throw std::invalid_argument("apply_attention: shape mismatch");
  return ad::mul(t, ad::sigmoid(t, logits), image);
}

}  // namespace radarloc::attn
