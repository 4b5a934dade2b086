#pragma once

#include <vector>

#include "radarloc/autodiff.hpp"
#include "radarloc/pose_algebra.hpp"
#include "radarloc/radar_geometry.hpp"

namespace radarloc::loss {

using ad::Tape;
using ad::Var;

// Learnable balance scalars shared by every loss term.
struct LossBalance {
  double beta = 0.0;
  double gamma = -3.0;
};

// N consecutive frames forming one training sample.
struct SequenceWindow {
  std::vector<radar::CartesianImage> images;
  std::vector<pose::Pose> gt_poses;
  std::vector<int> indices;

  int size() const { return static_cast<int>(images.size()); }
};

// h = |p - p^|_1 e^-beta + beta + |w - w^|_1 e^-gamma + gamma
double vanilla_loss_h(const pose::LogPose& pred, const pose::LogPose& gt,
                      const LossBalance& bal);

struct SequenceLoss {
  double gp = 0.0;
  double rp = 0.0;
  double total = 0.0;
};

// L_gp sums h over the N absolute poses; L_rp sums h over the N-1
// consecutive relative transforms (predictions decoded via quat_exp,
// compared in log-quaternion space); L_total = L_gp + L_rp.
SequenceLoss sequence_loss(const std::vector<pose::LogPose>& preds,
                           const SequenceWindow& window,
                           const LossBalance& bal);

// --- tape versions (for training) ---------------------------------------

struct PredVars {
  Var p, w;
};

struct SequenceLossVars {
  Var gp, rp, total;
};

Var vanilla_loss_h(Tape& t, Var p_pred, Var w_pred, const pose::LogPose& gt,
                   Var beta, Var gamma);

// When separate_relative_balance is true the relative terms use
// (beta_rp, gamma_rp) instead of sharing the global pair.
SequenceLossVars sequence_loss(Tape& t, const std::vector<PredVars>& preds,
                               const SequenceWindow& window, Var beta,
                               Var gamma, Var beta_rp = {}, Var gamma_rp = {});

}  // namespace radarloc::loss
