#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "radarloc/network.hpp"

using namespace radarloc;
using ad::ParamStore;
using ad::Tape;
using ad::Var;
using oracles::random_tensor;

namespace {

Tensor random_image(int h, int w, Rng& rng) {
  Tensor img({h, w});
  for (std::size_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("encoder produces a feature vector of the configured size") {
  for (const char* variant : {"dense", "residual"}) {
    Rng rng(70);
    ParamStore store;
    net::EncoderConfig cfg;
    cfg.variant = variant;
    cfg.feature_dim = 37;
    net::Encoder enc(cfg, store, rng);

    Tape t(ad::Exec::serial);
    Tensor img({1, 32, 32});
    Rng ir(71);
    for (std::size_t i = 0; i < img.numel(); ++i) img[i] = ir.uniform();
    Var z = enc.encode(t, t.constant(img));
    REQUIRE(t.value(z).ndim() == 1);
    CHECK(t.value(z).dim(0) == 37);
    CHECK(t.value(z).all_finite());
  }
}

TEST_CASE("encoder rejects malformed input") {
  Rng rng(72);
  ParamStore store;
  net::Encoder enc(net::EncoderConfig{}, store, rng);
  Tape t(ad::Exec::serial);
  CHECK_THROWS(enc.encode(t, t.constant(Tensor({3, 16, 16}, 0.1))));
  Tensor bad({1, 16, 16});
  bad[0] = std::nan("");
  CHECK_THROWS(enc.encode(t, t.constant(bad)));
}

TEST_CASE("regressor emits two 3-vectors from disjoint branches") {
  Rng rng(73);
  ParamStore store;
  net::RegressorConfig cfg;
  net::Regressor reg(cfg, 16, store, rng);

  Tape t(ad::Exec::serial);
  Var z = t.constant(random_tensor({16}, rng));
  const net::Regressor::Heads heads = reg.regress(t, z);
  REQUIRE(t.value(heads.p).dim(0) == 3);
  REQUIRE(t.value(heads.w).dim(0) == 3);

  // zeroing the rotation branch must not move the translation head
  const Tensor p_before = t.value(heads.p);
  for (int pid = 0; pid < store.count(); ++pid)
    if (store.name(pid).find(".w_branch") != std::string::npos ||
        store.name(pid).find("regressor.w") != std::string::npos)
      store.value(pid).fill(0.0);
  Tape t2(ad::Exec::serial);
  Var z2 = t2.constant(t.value(z));
  const net::Regressor::Heads heads2 = reg.regress(t2, z2);
  for (int k = 0; k < 3; ++k) {
    CHECK(t2.value(heads2.p)[k] == p_before[k]);
    CHECK(t2.value(heads2.w)[k] == 0.0);
  }
}

TEST_CASE("model forward shapes and predict consistency") {
  Rng rng(74);
  net::ModelConfig cfg = net::desk_model_config();
  cfg.encoder.feature_dim = 32;
  net::Model model(cfg, 5);

  radar::CartesianImage img;
  img.pixels = random_image(32, 32, rng);
  img.timestamp = 99;

  Tape t(ad::Exec::serial);
  const net::Model::Forward f = model.forward(t, img.pixels);
  CHECK(t.value(f.p).dim(0) == 3);
  CHECK(t.value(f.w).dim(0) == 3);
  CHECK(t.value(f.masked).same_shape(Tensor({1, 32, 32})));

  const pose::LogPose lp = model.predict(img, ad::Exec::serial);
  for (int k = 0; k < 3; ++k) {
    CHECK(lp.p[k] == t.value(f.p)[k]);
    CHECK(lp.w[k] == t.value(f.w)[k]);
  }
}

TEST_CASE("model initialization is seed deterministic") {
  net::ModelConfig cfg = net::desk_model_config();
  cfg.encoder.feature_dim = 16;
  net::Model a(cfg, 11), b(cfg, 11), c(cfg, 12);
  REQUIRE(a.params().count() == b.params().count());
  bool all_same = true, any_diff_seed = false;
  for (int pid = 0; pid < a.params().count(); ++pid) {
    const Tensor& ta = a.params().value(pid);
    const Tensor& tb = b.params().value(pid);
    const Tensor& tc = c.params().value(pid);
    for (std::size_t i = 0; i < ta.numel(); ++i) {
      all_same &= (ta[i] == tb[i]);
      any_diff_seed |= (ta[i] != tc[i]);
    }
  }
  CHECK(all_same);
  CHECK(any_diff_seed);
}

TEST_CASE("attention off still yields a valid forward pass") {
  Rng rng(75);
  net::ModelConfig cfg = net::desk_model_config();
  cfg.attention_mode = attn::AttentionMode::off;
  cfg.encoder.feature_dim = 16;
  net::Model model(cfg, 3);

  Tape t(ad::Exec::serial);
  const Tensor img = random_image(32, 32, rng);
  const net::Model::Forward f = model.forward(t, img);
  CHECK(t.value(f.p).all_finite());
  // identity attention: the encoder sees the raw image
  for (std::size_t i = 0; i < img.numel(); ++i)
    CHECK(t.value(f.masked)[i] == img[i]);
}

TEST_CASE("paper preset carries the published architecture constants") {
  const net::ModelConfig cfg = net::paper_model_config();
  CHECK(cfg.attention.levels == 6);
  const std::vector<int> widths{8, 16, 32, 64, 128, 256};
  CHECK(cfg.attention.channel_widths == widths);
  CHECK(cfg.encoder.variant == "dense");
  CHECK(cfg.encoder.preset == "paper");
  CHECK(cfg.encoder.pool_grid == 1);  // the published tail pools globally
}

TEST_CASE("pool grid widens the encoder fc by grid squared") {
  for (const char* variant : {"dense", "residual"}) {
    int fc_in[2] = {0, 0};
    for (int g : {1, 2}) {
      Rng rng(78);
      ParamStore store;
      net::EncoderConfig cfg;
      cfg.variant = variant;
      cfg.pool_grid = g;
      net::Encoder enc(cfg, store, rng);
      for (int pid = 0; pid < store.count(); ++pid)
        if (store.name(pid) == "encoder.fc.w")
          fc_in[g - 1] = store.value(pid).dim(1);

      Tape t(ad::Exec::serial);
      Rng ir(79);
      Tensor img({1, 32, 32});
      for (std::size_t i = 0; i < img.numel(); ++i) img[i] = ir.uniform();
      Var z = enc.encode(t, t.constant(img));
      CHECK(t.value(z).dim(0) == cfg.feature_dim);
    }
    CHECK(fc_in[1] == 4 * fc_in[0]);
  }
}

TEST_CASE("pooled grid keeps predictions sensitive to blob position") {
  // one bright blob placed in opposite corners: a pose regressor is
  // useless if moving the scene does not move the output
  auto corner_image = [](bool top_left) {
    Tensor img({32, 32});
    const int base = top_left ? 4 : 22;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) img[(base + r) * 32 + base + c] = 1.0;
    return img;
  };
  net::ModelConfig cfg = net::desk_model_config();
  net::Model model(cfg, 21);
  radar::CartesianImage a, b;
  a.pixels = corner_image(true);
  b.pixels = corner_image(false);
  const pose::LogPose pa = model.predict(a, ad::Exec::serial);
  const pose::LogPose pb = model.predict(b, ad::Exec::serial);
  double diff = 0.0;
  for (int k = 0; k < 3; ++k)
    diff += std::abs(pa.p[k] - pb.p[k]) + std::abs(pa.w[k] - pb.w[k]);
  CHECK(diff > 1e-3);
}

TEST_CASE("serial and parallel forward agree bitwise") {
  Rng rng(76);
  net::ModelConfig cfg = net::desk_model_config();
  cfg.encoder.feature_dim = 16;
  net::Model model(cfg, 8);

  radar::CartesianImage img;
  img.pixels = random_image(32, 32, rng);
  const pose::LogPose a = model.predict(img, ad::Exec::serial);
  const pose::LogPose b = model.predict(img, ad::Exec::parallel);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.p[k] == b.p[k]);
    CHECK(a.w[k] == b.w[k]);
  }
}

TEST_CASE("gradients reach every parameter group") {
  Rng rng(77);
  net::ModelConfig cfg = net::desk_model_config();
  cfg.encoder.feature_dim = 16;
  net::Model model(cfg, 9);

  Tape t(ad::Exec::serial);
  const net::Model::Forward f = model.forward(t, random_image(32, 32, rng));
  Var loss = ad::add(t, ad::l1_norm(t, f.p), ad::l1_norm(t, f.w));
  t.backward(loss);
  std::vector<Tensor> grads = model.params().make_grad_buffers();
  t.add_param_grads(grads);

  auto group_norm = [&](const std::string& prefix) {
    double s = 0.0;
    for (int pid = 0; pid < model.params().count(); ++pid)
      if (model.params().name(pid).rfind(prefix, 0) == 0)
        for (std::size_t i = 0; i < grads[pid].numel(); ++i)
          s += std::abs(grads[pid][i]);
    return s;
  };
  CHECK(group_norm("attn.") > 0.0);
  CHECK(group_norm("encoder.") > 0.0);
  CHECK(group_norm("regressor.") > 0.0);
}
