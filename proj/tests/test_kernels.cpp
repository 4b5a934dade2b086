#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "radarloc/kernels.hpp"

using namespace radarloc;
using kernels::Exec;
using oracles::random_tensor;

namespace {

// direct convolution written independently of the library loop order
Tensor conv_ref(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                int pad) {
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (wd + 2 * pad - k) / stride + 1;
  Tensor y({co, oh, ow});
  for (int oc = 0; oc < co; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < ci; ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride + ky - pad;
              const int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += x.at3(ic, iy, ix) *
                     w[((oc * ci + ic) * k + ky) * k + kx];
            }
        y.at3(oc, oy, ox) = acc;
      }
  return y;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("conv2d forward matches a direct reference") {
  Rng rng(11);
  for (const auto [stride, pad] : {std::pair{1, 1}, {2, 1}, {1, 0}}) {
    const Tensor x = random_tensor({3, 8, 8}, rng);
    const Tensor w = random_tensor({5, 3, 3, 3}, rng);
    const Tensor b = random_tensor({5}, rng);
    Tensor y;
    kernels::conv2d_forward(x, w, b, stride, pad, y, Exec::serial);
    const Tensor ref = conv_ref(x, w, b, stride, pad);
    REQUIRE(y.same_shape(ref));
    for (std::size_t i = 0; i < y.numel(); ++i)
      CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(12);
  Tensor x = random_tensor({2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  const int stride = 2, pad = 1;

  Tensor y0;
  kernels::conv2d_forward(x, w, b, stride, pad, y0, Exec::serial);
  const Tensor gy = random_tensor(y0.shape(), rng);

  // loss = sum(y * gy); its gradients are what the backward kernels return
  auto loss = [&]() {
    Tensor y;
    kernels::conv2d_forward(x, w, b, stride, pad, y, Exec::serial);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * gy[i];
    return s;
  };

  Tensor gx(x.shape()), gw(w.shape()), gb(b.shape());
  kernels::conv2d_backward_input(gy, w, stride, pad, gx, Exec::serial);
  kernels::conv2d_backward_weight(gy, x, stride, pad, gw, gb, Exec::serial);

  const double h = 1e-6;
  auto check_fd = [&](Tensor& target, const Tensor& grad) {
    for (std::size_t i = 0; i < target.numel(); i += 7) {
      const double x0 = target[i];
      target[i] = x0 + h;
      const double fp = loss();
      target[i] = x0 - h;
      const double fm = loss();
      target[i] = x0;
      CHECK(oracles::rel_err(grad[i], (fp - fm) / (2 * h)) < 1e-5);
    }
  };
  check_fd(x, gx);
  check_fd(w, gw);
  check_fd(b, gb);
}

TEST_CASE("relu and sigmoid") {
  Rng rng(13);
  const Tensor x = random_tensor({4, 6}, rng);
  Tensor y;
  kernels::relu_forward(x, y, Exec::serial);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(y[i] == std::max(0.0, x[i]));

  Tensor s;
  kernels::sigmoid_forward(x, s, Exec::serial);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(s[i] == doctest::Approx(1.0 / (1.0 + std::exp(-x[i]))));
    CHECK(s[i] > 0.0);
    CHECK(s[i] < 1.0);
  }

  const Tensor gy = random_tensor(x.shape(), rng);
  Tensor gx(x.shape());
  kernels::relu_backward(x, gy, gx, Exec::serial);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(gx[i] == (x[i] > 0.0 ? gy[i] : 0.0));

  Tensor gs(x.shape());
  kernels::sigmoid_backward(s, gy, gs, Exec::serial);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(gs[i] == doctest::Approx(gy[i] * s[i] * (1.0 - s[i])));
}

TEST_CASE("avgpool2 and upsample2") {
  Rng rng(14);
  const Tensor x = random_tensor({2, 4, 6}, rng);
  Tensor p;
  kernels::avgpool2_forward(x, p, Exec::serial);
  REQUIRE(p.dim(1) == 2);
  REQUIRE(p.dim(2) == 3);
  CHECK(p.at3(1, 0, 1) ==
        doctest::Approx(0.25 * (x.at3(1, 0, 2) + x.at3(1, 0, 3) +
                                x.at3(1, 1, 2) + x.at3(1, 1, 3))));

  Tensor u;
  kernels::upsample2_forward(p, u, Exec::serial);
  REQUIRE(u.same_shape(Tensor({2, 4, 6})));
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 6; ++j)
        CHECK(u.at3(c, i, j) == p.at3(c, i / 2, j / 2));

  // pooling then upsampling preserves the mean exactly
  double mx = 0.0, mu = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) mx += x[i];
  for (std::size_t i = 0; i < u.numel(); ++i) mu += u[i];
  CHECK(mx == doctest::Approx(mu));
}

TEST_CASE("global average pool") {
  Rng rng(15);
  const Tensor x = random_tensor({3, 4, 4}, rng);
  Tensor y;
  kernels::global_avgpool_forward(x, y, Exec::serial);
  REQUIRE(y.numel() == 3);
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) s += x.at3(c, i, j);
    CHECK(y[c] == doctest::Approx(s / 16.0));
  }
}

TEST_CASE("linear matches Eigen") {
  Rng rng(16);
  const Tensor x = random_tensor({7}, rng);
  const Tensor w = random_tensor({4, 7}, rng);
  const Tensor b = random_tensor({4}, rng);
  Tensor y;
  kernels::linear_forward(x, w, b, y, Exec::serial);

  Eigen::MatrixXd W(4, 7);
  Eigen::VectorXd X(7), B(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 7; ++j) W(i, j) = w[i * 7 + j];
  for (int j = 0; j < 7; ++j) X(j) = x[j];
  for (int i = 0; i < 4; ++i) B(i) = b[i];
  const Eigen::VectorXd Y = W * X + B;
  for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(Y(i)));
}

TEST_CASE("serial and parallel kernels are bitwise identical") {
  Rng rng(17);
  const Tensor x = random_tensor({4, 10, 10}, rng);
  const Tensor w = random_tensor({6, 4, 3, 3}, rng);
  const Tensor b = random_tensor({6}, rng);
  const Tensor v = random_tensor({12}, rng);
  const Tensor lw = random_tensor({5, 12}, rng);
  const Tensor lb = random_tensor({5}, rng);

  Tensor ys, yp;
  kernels::conv2d_forward(x, w, b, 2, 1, ys, Exec::serial);
  kernels::conv2d_forward(x, w, b, 2, 1, yp, Exec::parallel);
  CHECK(bitwise_equal(ys, yp));

  const Tensor gy = random_tensor(ys.shape(), rng);
  Tensor gxs(x.shape()), gxp(x.shape());
  kernels::conv2d_backward_input(gy, w, 2, 1, gxs, Exec::serial);
  kernels::conv2d_backward_input(gy, w, 2, 1, gxp, Exec::parallel);
  CHECK(bitwise_equal(gxs, gxp));

  Tensor gws(w.shape()), gbs(b.shape()), gwp(w.shape()), gbp(b.shape());
  kernels::conv2d_backward_weight(gy, x, 2, 1, gws, gbs, Exec::serial);
  kernels::conv2d_backward_weight(gy, x, 2, 1, gwp, gbp, Exec::parallel);
  CHECK(bitwise_equal(gws, gwp));
  CHECK(bitwise_equal(gbs, gbp));

  Tensor ls, lp;
  kernels::linear_forward(v, lw, lb, ls, Exec::serial);
  kernels::linear_forward(v, lw, lb, lp, Exec::parallel);
  CHECK(bitwise_equal(ls, lp));

  Tensor ps, pp;
  kernels::avgpool2_forward(x, ps, Exec::serial);
  kernels::avgpool2_forward(x, pp, Exec::parallel);
  CHECK(bitwise_equal(ps, pp));

  Tensor us, up;
  kernels::upsample2_forward(x, us, Exec::serial);
  kernels::upsample2_forward(x, up, Exec::parallel);
  CHECK(bitwise_equal(us, up));

  Tensor gaps, gapp;
  kernels::global_avgpool_forward(x, gaps, Exec::serial);
  kernels::global_avgpool_forward(x, gapp, Exec::parallel);
  CHECK(bitwise_equal(gaps, gapp));
}
