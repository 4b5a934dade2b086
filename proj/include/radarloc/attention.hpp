#pragma once

#include <map>
#include <string>
#include <vector>

#include "radarloc/autodiff.hpp"
#include "radarloc/rng.hpp"

namespace radarloc::attn {

using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct AttentionConfig {
  int levels = 3;
  std::vector<int> channel_widths = {8, 16, 32};
  std::string activation = "relu";
};

enum class AttentionMode { full, plain_encoder_decoder, off };

AttentionMode attention_mode_from_string(const std::string& s);
std::string to_string(AttentionMode m);

// Node features X^{i,j}, defined for i + j <= levels - 1.
struct NodeGrid {
  int levels = 0;
  std::map<std::pair<int, int>, Var> nodes;

  bool has(int i, int j) const { return nodes.count({i, j}) > 0; }
  Var at(int i, int j) const { return nodes.at({i, j}); }
};

// Nested encoder-decoder producing a mask-logit grid:
//   X^{i,0} from X^{i-1,0} via stride-2 3x3 conv (stride 1 at i = 0),
//   X^{i,j} from concat([X^{i,k}]_{k<j}, upsample2(X^{i+1,j-1})).
// Level-0 nodes output a single channel and omit the activation, so
// the fused logits are signed and a zero parameter set gives mask 0.5.
// Deeper nodes use channel_widths[i]. In plain_encoder_decoder mode
// only the backbone column and the single decoder diagonal i+j = n-1
// exist, and the logits are X^{0,n-1} alone.
class AttentionModule {
 public:
  AttentionModule(const AttentionConfig& cfg, AttentionMode mode,
                  ParamStore& store, Rng& rng);

  NodeGrid build_node_grid(Tape& t, Var input) const;  // input [1,H,W]
  Var fuse_top_level(Tape& t, const NodeGrid& grid) const;

  // sigmoid(logits) * image; identity in off mode
  Var apply(Tape& t, Var image) const;

  AttentionMode mode() const { return mode_; }
  const AttentionConfig& config() const { return cfg_; }
  int node_count() const { return static_cast<int>(specs_.size()); }

 private:
  struct NodeSpec {
    int i = 0, j = 0;
    int in_ch = 0, out_ch = 0;
    int stride = 1;
    bool activated = true;
    int wid = -1, bid = -1;
  };
  int channels_at(int level) const;
  const NodeSpec& spec(int i, int j) const;

  AttentionConfig cfg_;
  AttentionMode mode_;
  ParamStore* store_ = nullptr;  // not owned; must outlive the module
  std::vector<NodeSpec> specs_;
};

Var apply_attention(Tape& t, Var image, Var logits);

}  // namespace radarloc::attn
