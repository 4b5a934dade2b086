#pragma once

#include <memory>
#include <string>
#include <vector>

#include "radarloc/attention.hpp"
#include "radarloc/autodiff.hpp"
#include "radarloc/pose_algebra.hpp"
#include "radarloc/radar_geometry.hpp"
#include "radarloc/rng.hpp"

namespace radarloc::net {

using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct EncoderConfig {
  std::string variant = "dense";  // dense | residual
  int feature_dim = 256;
  std::string preset = "desk";  // desk | paper
  // Side of the pooled grid flattened into the fc layer. 1 is global
  // average pooling; 2 keeps a coarse spatial layout, which the pose
  // heads need when the scene is a rigidly moved copy of one template.
  int pool_grid = 2;
};

struct RegressorConfig {
  std::vector<int> hidden_sizes = {128, 64};  // trunk width, branch widths...
  std::string activation = "relu";
};

// Backbone + pooling to a pool_grid x pool_grid map + fully connected
// layer to feature_dim. The single-channel input is broadcast to 3
// channels first.
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, ParamStore& store, Rng& rng);
  Var encode(Tape& t, Var image) const;  // [1,H,W] -> [F]
  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Conv {
    int wid = -1, bid = -1;
    int stride = 1, pad = 1;
  };
  Conv add_conv(ParamStore& store, Rng& rng, const std::string& name,
                int in_ch, int out_ch, int k, int stride, int pad);
  Var run_conv(Tape& t, const Conv& c, Var x) const;

  EncoderConfig cfg_;
  ParamStore* store_ = nullptr;
  Conv stem_;
  // dense variant: blocks of concatenative layers joined by transitions
  std::vector<std::vector<Conv>> dense_blocks_;
  std::vector<Conv> transitions_;
  // residual variant: two convolutions per stage plus optional projection
  struct ResStage {
    Conv c1, c2, proj;
    bool has_proj = false;
  };
  std::vector<ResStage> res_stages_;
  int fc_wid = -1, fc_bid = -1;
  int backbone_out_ch_ = 0;
};

// Shared trunk, then independent translation and rotation branches; the
// last layer of each branch is linear.
class Regressor {
 public:
  Regressor(const RegressorConfig& cfg, int feature_dim, ParamStore& store,
            Rng& rng);
  struct Heads {
    Var p, w;
  };
  Heads regress(Tape& t, Var z) const;
  const RegressorConfig& config() const { return cfg_; }

 private:
  struct Fc {
    int wid = -1, bid = -1;
  };
  Fc add_fc(ParamStore& store, Rng& rng, const std::string& name, int in,
            int out);
  Var run_fc(Tape& t, const Fc& f, Var x) const;

  RegressorConfig cfg_;
  ParamStore* store_ = nullptr;
  Fc trunk_;
  std::vector<Fc> p_branch_, w_branch_;
};

struct ModelConfig {
  attn::AttentionConfig attention;
  attn::AttentionMode attention_mode = attn::AttentionMode::full;
  EncoderConfig encoder;
  RegressorConfig regressor;
};

ModelConfig desk_model_config();
ModelConfig paper_model_config();

// Full pipeline f = regress . encode . apply_attention.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);

  struct Forward {
    Var p, w;      // LogPose heads
    Var masked;    // attention output fed to the encoder
  };
  Forward forward(Tape& t, Var image) const;
  Forward forward(Tape& t, const Tensor& image_hw) const;

  // single-frame inference on a throwaway tape
  pose::LogPose predict(const radar::CartesianImage& img,
                        ad::Exec exec = ad::Exec::parallel) const;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const attn::AttentionModule& attention() const { return *attn_; }
  const Encoder& encoder() const { return *encoder_; }
  const Regressor& regressor() const { return *regressor_; }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  std::unique_ptr<attn::AttentionModule> attn_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Regressor> regressor_;
};

// [H,W] image tensor -> [1,H,W] network input, validating finiteness
Tensor to_network_input(const Tensor& image_hw);

}  // namespace radarloc::net
