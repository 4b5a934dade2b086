#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "radarloc/losses.hpp"

using namespace radarloc;
using ad::ParamStore;
using ad::Tape;
using ad::Var;
using loss::LossBalance;
using loss::SequenceWindow;
using pose::LogPose;
using pose::Pose;

namespace {

SequenceWindow window_from(const std::vector<Pose>& poses) {
  SequenceWindow w;
  w.gt_poses = poses;
  w.images.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i)
    w.indices.push_back(static_cast<int>(i));
  return w;
}

std::vector<Pose> random_trajectory(int n, Rng& rng) {
  std::vector<Pose> out;
  for (int i = 0; i < n; ++i) {
    Pose p = oracles::random_pose(rng, 5.0);
    p.timestamp = i;
    out.push_back(p);
  }
  return out;
}

Pose left_transform(const Pose& t, const Pose& p) {
  Pose out;
  out.p = t.p + oracles::rotate_ref(t.q, p.p);
  out.q = oracles::canonical(oracles::quat_mul_ref(t.q, p.q));
  out.timestamp = p.timestamp;
  return out;
}

}  // namespace

TEST_CASE("vanilla loss frozen oracle") {
  // residuals |dp|_1 = 2 and |dw|_1 = 1 at beta = gamma = 0 give 3
  LogPose gt;
  LogPose pred;
  pred.p = {1.0, -0.5, 0.5};
  pred.w = {0.25, -0.25, 0.5};
  CHECK(loss::vanilla_loss_h(pred, gt, {0.0, 0.0}) == doctest::Approx(3.0));
}

TEST_CASE("vanilla loss matches the closed form over random inputs") {
  Rng rng(81);
  for (int i = 0; i < 200; ++i) {
    LogPose pred, gt;
    for (int k = 0; k < 3; ++k) {
      pred.p[k] = rng.normal();
      pred.w[k] = rng.normal();
      gt.p[k] = rng.normal();
      gt.w[k] = rng.normal();
    }
    const LossBalance bal{rng.uniform(-2.0, 2.0), rng.uniform(-4.0, 1.0)};
    const double rp = (pred.p - gt.p).lpNorm<1>();
    const double rw = (pred.w - gt.w).lpNorm<1>();
    const double expected = rp * std::exp(-bal.beta) + bal.beta +
                            rw * std::exp(-bal.gamma) + bal.gamma;
    CHECK(loss::vanilla_loss_h(pred, gt, bal) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("perfect predictions cost one beta+gamma per term") {
  Rng rng(82);
  const std::vector<Pose> gt = random_trajectory(4, rng);
  const SequenceWindow window = window_from(gt);

  std::vector<LogPose> preds;
  for (const Pose& p : gt) preds.push_back(pose::to_log_pose(p));

  const LossBalance bal{0.3, -0.2};
  const loss::SequenceLoss sl = loss::sequence_loss(preds, window, bal);
  // N global + (N-1) relative terms, each contributing beta + gamma
  CHECK(sl.gp == doctest::Approx(4 * (0.3 - 0.2)).epsilon(1e-9));
  CHECK(sl.rp == doctest::Approx(3 * (0.3 - 0.2)).epsilon(1e-9));
  CHECK(sl.total == doctest::Approx(7 * (0.3 - 0.2)).epsilon(1e-9));
}

TEST_CASE("term counts follow the window length") {
  Rng rng(83);
  for (int n : {1, 2, 4, 6}) {
    const std::vector<Pose> gt = random_trajectory(n, rng);
    const SequenceWindow window = window_from(gt);
    std::vector<LogPose> preds;
    for (const Pose& p : gt) preds.push_back(pose::to_log_pose(p));
    const LossBalance bal{1.0, 1.0};
    const loss::SequenceLoss sl = loss::sequence_loss(preds, window, bal);
    CHECK(sl.gp == doctest::Approx(2.0 * n).epsilon(1e-9));
    CHECK(sl.rp == doctest::Approx(2.0 * (n - 1)).epsilon(1e-9));
  }
}

TEST_CASE("rigid offset zeroes the relative loss but not the global one") {
  Rng rng(84);
  const std::vector<Pose> gt = random_trajectory(4, rng);
  const SequenceWindow window = window_from(gt);

  Pose offset;
  offset.p = {3.0, -1.0, 0.5};
  offset.q = pose::quat_exp({0.1, 0.2, -0.1});
  std::vector<LogPose> preds;
  for (const Pose& p : gt)
    preds.push_back(pose::to_log_pose(left_transform(offset, p)));

  const loss::SequenceLoss sl = loss::sequence_loss(preds, window, {0.0, 0.0});
  CHECK(sl.rp == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sl.gp > 0.1);
}

TEST_CASE("tape loss agrees with the scalar loss") {
  Rng rng(85);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    const std::vector<Pose> gt = random_trajectory(n, rng);
    const SequenceWindow window = window_from(gt);

    std::vector<LogPose> preds;
    for (int i = 0; i < n; ++i) {
      LogPose lp;
      for (int k = 0; k < 3; ++k) {
        lp.p[k] = rng.normal();
        lp.w[k] = 0.4 * rng.normal();
      }
      preds.push_back(lp);
    }
    const LossBalance bal{0.5, -1.0};
    const loss::SequenceLoss ref = loss::sequence_loss(preds, window, bal);

    Tape t(ad::Exec::serial);
    Var beta = t.constant(Tensor::scalar(bal.beta));
    Var gamma = t.constant(Tensor::scalar(bal.gamma));
    std::vector<loss::PredVars> pvars;
    for (const LogPose& lp : preds) {
      Tensor tp({3}), tw({3});
      for (int k = 0; k < 3; ++k) {
        tp[k] = lp.p[k];
        tw[k] = lp.w[k];
      }
      pvars.push_back({t.constant(tp), t.constant(tw)});
    }
    const loss::SequenceLossVars sl =
        loss::sequence_loss(t, pvars, window, beta, gamma);
    CHECK(t.value(sl.gp)[0] == doctest::Approx(ref.gp).epsilon(1e-9));
    CHECK(t.value(sl.rp)[0] == doctest::Approx(ref.rp).epsilon(1e-9));
    CHECK(t.value(sl.total)[0] == doctest::Approx(ref.total).epsilon(1e-9));
  }
}

TEST_CASE("single-frame window has no relative term") {
  Rng rng(86);
  const std::vector<Pose> gt = random_trajectory(1, rng);
  const SequenceWindow window = window_from(gt);
  Tape t(ad::Exec::serial);
  Var beta = t.constant(Tensor::scalar(0.0));
  Var gamma = t.constant(Tensor::scalar(0.0));
  Tensor tp({3}, 0.5), tw({3}, 0.1);
  std::vector<loss::PredVars> pvars{{t.constant(tp), t.constant(tw)}};
  const loss::SequenceLossVars sl =
      loss::sequence_loss(t, pvars, window, beta, gamma);
  CHECK(t.value(sl.rp)[0] == 0.0);
  CHECK(t.value(sl.total)[0] == t.value(sl.gp)[0]);
}

TEST_CASE("separate relative balance pair is honored") {
  Rng rng(87);
  const std::vector<Pose> gt = random_trajectory(3, rng);
  const SequenceWindow window = window_from(gt);
  std::vector<LogPose> preds;
  for (const Pose& p : gt) preds.push_back(pose::to_log_pose(p));

  Tape t(ad::Exec::serial);
  Var beta = t.constant(Tensor::scalar(0.25));
  Var gamma = t.constant(Tensor::scalar(0.5));
  Var beta_rp = t.constant(Tensor::scalar(-1.0));
  Var gamma_rp = t.constant(Tensor::scalar(2.0));
  std::vector<loss::PredVars> pvars;
  for (const LogPose& lp : preds) {
    Tensor tp({3}), tw({3});
    for (int k = 0; k < 3; ++k) {
      tp[k] = lp.p[k];
      tw[k] = lp.w[k];
    }
    pvars.push_back({t.constant(tp), t.constant(tw)});
  }
  const loss::SequenceLossVars sl =
      loss::sequence_loss(t, pvars, window, beta, gamma, beta_rp, gamma_rp);
  // perfect predictions: gp = 3*(0.25+0.5), rp = 2*(-1.0+2.0)
  CHECK(t.value(sl.gp)[0] == doctest::Approx(3 * 0.75).epsilon(1e-9));
  CHECK(t.value(sl.rp)[0] == doctest::Approx(2 * 1.0).epsilon(1e-9));
}

TEST_CASE("loss gradients match finite differences including the balances") {
  Rng rng(88);
  ParamStore store;
  const int n = 3;
  const std::vector<Pose> gt = random_trajectory(n, rng);
  const SequenceWindow window = window_from(gt);

  std::vector<int> p_ids, w_ids;
  for (int i = 0; i < n; ++i) {
    p_ids.push_back(store.add("p" + std::to_string(i),
                              oracles::random_tensor({3}, rng)));
    w_ids.push_back(store.add("w" + std::to_string(i),
                              oracles::random_tensor({3}, rng, 0.4)));
  }
  const int beta_id = store.add("beta", Tensor::scalar(0.2));
  const int gamma_id = store.add("gamma", Tensor::scalar(-0.7));

  auto build = [&](Tape& t) {
    std::vector<loss::PredVars> pvars;
    for (int i = 0; i < n; ++i)
      pvars.push_back({t.param(store, p_ids[i]), t.param(store, w_ids[i])});
    return loss::sequence_loss(t, pvars, window, t.param(store, beta_id),
                               t.param(store, gamma_id))
        .total;
  };

  Tape tape(ad::Exec::serial);
  Var total = build(tape);
  tape.backward(total);
  std::vector<Tensor> grads = store.make_grad_buffers();
  tape.add_param_grads(grads);

  auto value = [&]() {
    Tape t2(ad::Exec::serial);
    return t2.value(build(t2))[0];
  };
  for (int pid = 0; pid < store.count(); ++pid)
    for (std::size_t i = 0; i < store.value(pid).numel(); ++i) {
      const double fd = oracles::central_diff(store, pid, i, value);
      CHECK(oracles::rel_err(grads[pid][i], fd) < 1e-4);
    }
}

TEST_CASE("non-finite predictions are rejected") {
  LogPose pred, gt;
  pred.p[0] = std::nan("");
  CHECK_THROWS_AS(loss::vanilla_loss_h(pred, gt, {0.0, 0.0}),
                  std::domain_error);
}
