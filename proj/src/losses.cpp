#include "radarloc/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace radarloc::loss {

namespace {

double l1(const Eigen::Vector3d& v) {
  return std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]);
}

Tensor vec_tensor(const Eigen::Vector3d& v) {
  Tensor t({3});
  t[0] = v[0];
  t[1] = v[1];
  t[2] = v[2];
  return t;
}

void check_finite(const pose::LogPose& lp, const char* who) {
  if (!lp.p.allFinite() || !lp.w.allFinite())
    throw std::domain_error(std::string(who) + ": non-finite pose");
}

}  // namespace

double vanilla_loss_h(const pose::LogPose& pred, const pose::LogPose& gt,
                      const LossBalance& bal) {
  check_finite(pred, "vanilla_loss_h");
  check_finite(gt, "vanilla_loss_h");
  if (!std::isfinite(bal.beta) || !std::isfinite(bal.gamma))
    throw std::domain_error("vanilla_loss_h: non-finite balance");
  return l1(pred.p - gt.p) * std::exp(-bal.beta) + bal.beta +
         l1(pred.w - gt.w) * std::exp(-bal.gamma) + bal.gamma;
}

SequenceLoss sequence_loss(const std::vector<pose::LogPose>& preds,
                           const SequenceWindow& window,
                           const LossBalance& bal) {
  const int n = window.size();
  if (static_cast<int>(preds.size()) != n)
    throw std::domain_error("sequence_loss: preds/window length mismatch");
  if (n < 1) throw std::domain_error("sequence_loss: empty window");
  SequenceLoss out;
  for (int i = 0; i < n; ++i)
    out.gp += vanilla_loss_h(preds[i], pose::to_log_pose(window.gt_poses[i]),
                             bal);
  for (int i = 0; i + 1 < n; ++i) {
    const pose::Pose pi = pose::from_log_pose(preds[i]);
    const pose::Pose pj = pose::from_log_pose(preds[i + 1]);
    const pose::LogPose q = pose::to_log_pose(pose::relative_pose(pi, pj));
    const pose::LogPose qh = pose::to_log_pose(
        pose::relative_pose(window.gt_poses[i], window.gt_poses[i + 1]));
    out.rp += vanilla_loss_h(q, qh, bal);
  }
  out.total = out.gp + out.rp;
  return out;
}

Var vanilla_loss_h(Tape& t, Var p_pred, Var w_pred, const pose::LogPose& gt,
                   Var beta, Var gamma) {
  check_finite(gt, "vanilla_loss_h");
  Var dp = ad::l1_norm(t, ad::sub(t, p_pred, t.constant(vec_tensor(gt.p))));
  Var dw = ad::l1_norm(t, ad::sub(t, w_pred, t.constant(vec_tensor(gt.w))));
  Var lp = ad::add(t, ad::mul(t, dp, ad::exp_neg(t, beta)), beta);
  Var lw = ad::add(t, ad::mul(t, dw, ad::exp_neg(t, gamma)), gamma);
  return ad::add(t, lp, lw);
}

SequenceLossVars sequence_loss(Tape& t, const std::vector<PredVars>& preds,
                               const SequenceWindow& window, Var beta,
                               Var gamma, Var beta_rp, Var gamma_rp) {
  const int n = window.size();
  if (static_cast<int>(preds.size()) != n)
    throw std::domain_error("sequence_loss: preds/window length mismatch");
  if (n < 1) throw std::domain_error("sequence_loss: empty window");
  if (!beta_rp.valid()) beta_rp = beta;
  if (!gamma_rp.valid()) gamma_rp = gamma;

  Var gp;
  for (int i = 0; i < n; ++i) {
    Var h = vanilla_loss_h(t, preds[i].p, preds[i].w,
                           pose::to_log_pose(window.gt_poses[i]), beta, gamma);
    gp = i == 0 ? h : ad::add(t, gp, h);
  }

  Var rp = t.constant(Tensor::scalar(0.0));
  for (int i = 0; i + 1 < n; ++i) {
    Var qi = ad::quat_exp(t, preds[i].w);
    Var qj = ad::quat_exp(t, preds[i + 1].w);
    Var qi_inv = ad::quat_conj(t, qi);
    // translation of the relative transform: R(q_i)^T (p_j - p_i)
    Var dp = ad::sub(t, preds[i + 1].p, preds[i].p);
    Var trel = ad::quat_vec(
        t, ad::quat_mul(t, ad::quat_mul(t, qi_inv, ad::pure_quat(t, dp)), qi));
    Var wrel = ad::quat_log_canon(t, ad::quat_mul(t, qi_inv, qj));
    const pose::LogPose qh = pose::to_log_pose(
        pose::relative_pose(window.gt_poses[i], window.gt_poses[i + 1]));
    Var h = vanilla_loss_h(t, trel, wrel, qh, beta_rp, gamma_rp);
    rp = i == 0 ? h : ad::add(t, rp, h);
  }

  SequenceLossVars out;
  out.gp = gp;
  out.rp = rp;
  out.total = ad::add(t, gp, rp);
  return out;
}

}  // namespace radarloc::loss
