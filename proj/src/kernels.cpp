#include "radarloc/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace radarloc::kernels {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(std::string("kernels: ") + msg);
}

int conv_out(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& y, Exec exec) {
  check(x.ndim() == 3 && w.ndim() == 4 && b.ndim() == 1, "conv2d shapes");
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check(w.dim(1) == cin, "conv2d channel mismatch");
  check(b.dim(0) == cout, "conv2d bias mismatch");
  const int ho = conv_out(h, kh, stride, pad), wo = conv_out(wd, kw, stride, pad);
  check(ho >= 1 && wo >= 1, "conv2d output empty");
  y = Tensor({cout, ho, wo});

  const bool par = exec == Exec::parallel;
  const double* xd = x.data();
  const double* wv = w.data();
  double* yd = y.data();
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < cout * ho; ++r) {
    const int co = r / ho, oy = r % ho;
    double* yrow = yd + (static_cast<std::size_t>(co) * ho + oy) * wo;
    const double bias = b[co];
    for (int ox = 0; ox < wo; ++ox) yrow[ox] = bias;
    for (int ci = 0; ci < cin; ++ci) {
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= h) continue;
        const double* xrow = xd + (static_cast<std::size_t>(ci) * h + iy) * wd;
        const double* wrow =
            wv + ((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw;
        for (int kx = 0; kx < kw; ++kx) {
          const double wk = wrow[kx];
          // valid ox range so that 0 <= ox*stride + kx - pad < wd
          int lo = 0, hi = wo - 1;
          const int off = kx - pad;
          if (off < 0) lo = (-off + stride - 1) / stride;
          if (off + hi * stride >= wd) hi = (wd - 1 - off) / stride;
          for (int ox = lo; ox <= hi; ++ox)
            yrow[ox] += wk * xrow[ox * stride + off];
        }
      }
    }
  }
}

void conv2d_backward_input(const Tensor& gy, const Tensor& w, int stride,
                           int pad, Tensor& gx, Exec exec) {
  const int cout = gy.dim(0), ho = gy.dim(1), wo = gy.dim(2);
  const int cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  check(gx.ndim() == 3 && gx.dim(0) == cin, "conv2d bwd input shape");
  const int h = gx.dim(1), wd = gx.dim(2);

  const bool par = exec == Exec::parallel;
  const double* gyd = gy.data();
  const double* wv = w.data();
  double* gxd = gx.data();
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < cin * h; ++r) {
    const int ci = r / h, iy = r % h;
    double* gxrow = gxd + (static_cast<std::size_t>(ci) * h + iy) * wd;
    for (int ix = 0; ix < wd; ++ix) {
      double acc = 0.0;
      for (int co = 0; co < cout; ++co) {
        for (int ky = 0; ky < kh; ++ky) {
          const int ny = iy + pad - ky;
          if (ny < 0 || ny % stride != 0) continue;
          const int oy = ny / stride;
          if (oy >= ho) continue;
          const double* gyrow =
              gyd + (static_cast<std::size_t>(co) * ho + oy) * wo;
          const double* wrow =
              wv + ((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw;
          for (int kx = 0; kx < kw; ++kx) {
            const int nx = ix + pad - kx;
            if (nx < 0 || nx % stride != 0) continue;
            const int ox = nx / stride;
            if (ox >= wo) continue;
            acc += gyrow[ox] * wrow[kx];
          }
        }
      }
      gxrow[ix] += acc;
    }
  }
}

void conv2d_backward_weight(const Tensor& gy, const Tensor& x, int stride,
                            int pad, Tensor& gw, Tensor& gb, Exec exec) {
  const int cout = gy.dim(0), ho = gy.dim(1), wo = gy.dim(2);
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  check(gw.ndim() == 4 && gw.dim(0) == cout && gw.dim(1) == cin,
        "conv2d bwd weight shape");
  const int kh = gw.dim(2), kw = gw.dim(3);

  const bool par = exec == Exec::parallel;
  const double* gyd = gy.data();
  const double* xd = x.data();
  double* gwd = gw.data();
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < cout * cin; ++r) {
    const int co = r / cin, ci = r % cin;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double acc = 0.0;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const double* gyrow =
              gyd + (static_cast<std::size_t>(co) * ho + oy) * wo;
          const double* xrow = xd + (static_cast<std::size_t>(ci) * h + iy) * wd;
          int lo = 0, hi = wo - 1;
          const int off = kx - pad;
          if (off < 0) lo = (-off + stride - 1) / stride;
          if (off + hi * stride >= wd) hi = (wd - 1 - off) / stride;
          for (int ox = lo; ox <= hi; ++ox)
            acc += gyrow[ox] * xrow[ox * stride + off];
        }
        gwd[((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw + kx] +=
            acc;
      }
    }
  }

  double* gbd = gb.data();
#pragma omp parallel for schedule(static) if (par)
  for (int co = 0; co < cout; ++co) {
    double acc = 0.0;
    const double* gyp = gyd + static_cast<std::size_t>(co) * ho * wo;
    for (int i = 0; i < ho * wo; ++i) acc += gyp[i];
    gbd[co] += acc;
  }
}

void relu_forward(const Tensor& x, Tensor& y, Exec exec) {
  y = Tensor(x.shape());
  const std::size_t n = x.numel();
  const double* xd = x.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
}

void relu_backward(const Tensor& x, const Tensor& gy, Tensor& gx, Exec exec) {
  const std::size_t n = x.numel();
  const double* xd = x.data();
  const double* gyd = gy.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i)
    if (xd[i] > 0.0) gxd[i] += gyd[i];
}

void sigmoid_forward(const Tensor& x, Tensor& y, Exec exec) {
  y = Tensor(x.shape());
  const std::size_t n = x.numel();
  const double* xd = x.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) yd[i] = 1.0 / (1.0 + std::exp(-xd[i]));
}

void sigmoid_backward(const Tensor& y, const Tensor& gy, Tensor& gx, Exec exec) {
  const std::size_t n = y.numel();
  const double* yd = y.data();
  const double* gyd = gy.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) gxd[i] += gyd[i] * yd[i] * (1.0 - yd[i]);
}

void upsample2_forward(const Tensor& x, Tensor& y, Exec exec) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  y = Tensor({c, 2 * h, 2 * w});
  const double* xd = x.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < c * h; ++r) {
    const int ci = r / h, iy = r % h;
    const double* xrow = xd + (static_cast<std::size_t>(ci) * h + iy) * w;
    for (int sub = 0; sub < 2; ++sub) {
      double* yrow =
          yd + (static_cast<std::size_t>(ci) * 2 * h + 2 * iy + sub) * 2 * w;
      for (int ix = 0; ix < w; ++ix) {
        yrow[2 * ix] = xrow[ix];
        yrow[2 * ix + 1] = xrow[ix];
      }
    }
  }
}

void upsample2_backward(const Tensor& gy, Tensor& gx, Exec exec) {
  const int c = gx.dim(0), h = gx.dim(1), w = gx.dim(2);
  const double* gyd = gy.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < c * h; ++r) {
    const int ci = r / h, iy = r % h;
    double* gxrow = gxd + (static_cast<std::size_t>(ci) * h + iy) * w;
    const double* g0 =
        gyd + (static_cast<std::size_t>(ci) * 2 * h + 2 * iy) * 2 * w;
    const double* g1 =
        gyd + (static_cast<std::size_t>(ci) * 2 * h + 2 * iy + 1) * 2 * w;
    for (int ix = 0; ix < w; ++ix)
      gxrow[ix] += g0[2 * ix] + g0[2 * ix + 1] + g1[2 * ix] + g1[2 * ix + 1];
  }
}

void avgpool2_forward(const Tensor& x, Tensor& y, Exec exec) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  check(h % 2 == 0 && w % 2 == 0, "avgpool2 needs even dims");
  y = Tensor({c, h / 2, w / 2});
  const double* xd = x.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < c * (h / 2); ++r) {
    const int ci = r / (h / 2), oy = r % (h / 2);
    const double* r0 = xd + (static_cast<std::size_t>(ci) * h + 2 * oy) * w;
    const double* r1 = xd + (static_cast<std::size_t>(ci) * h + 2 * oy + 1) * w;
    double* yrow = yd + (static_cast<std::size_t>(ci) * (h / 2) + oy) * (w / 2);
    for (int ox = 0; ox < w / 2; ++ox)
      yrow[ox] = 0.25 * (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]);
  }
}

void avgpool2_backward(const Tensor& gy, Tensor& gx, Exec exec) {
  const int c = gx.dim(0), h = gx.dim(1), w = gx.dim(2);
  const double* gyd = gy.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < c * (h / 2); ++r) {
    const int ci = r / (h / 2), oy = r % (h / 2);
    const double* gyrow =
        gyd + (static_cast<std::size_t>(ci) * (h / 2) + oy) * (w / 2);
    double* r0 = gxd + (static_cast<std::size_t>(ci) * h + 2 * oy) * w;
    double* r1 = gxd + (static_cast<std::size_t>(ci) * h + 2 * oy + 1) * w;
    for (int ox = 0; ox < w / 2; ++ox) {
      const double g = 0.25 * gyrow[ox];
      r0[2 * ox] += g;
      r0[2 * ox + 1] += g;
      r1[2 * ox] += g;
      r1[2 * ox + 1] += g;
    }
  }
}

void global_avgpool_forward(const Tensor& x, Tensor& y, Exec exec) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  y = Tensor({c});
  const double inv = 1.0 / (static_cast<double>(h) * w);
  const double* xd = x.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    const double* xp = xd + static_cast<std::size_t>(ci) * h * w;
    for (int i = 0; i < h * w; ++i) acc += xp[i];
    yd[ci] = acc * inv;
  }
}

void global_avgpool_backward(const Tensor& gy, const std::vector<int>& xshape,
                             Tensor& gx, Exec exec) {
  const int c = xshape[0], h = xshape[1], w = xshape[2];
  const double inv = 1.0 / (static_cast<double>(h) * w);
  const double* gyd = gy.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const double g = gyd[ci] * inv;
    double* gxp = gxd + static_cast<std::size_t>(ci) * h * w;
    for (int i = 0; i < h * w; ++i) gxp[i] += g;
  }
}

void linear_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    Tensor& y, Exec exec) {
  check(w.ndim() == 2 && x.ndim() == 1, "linear shapes");
  const int out = w.dim(0), in = w.dim(1);
  check(x.dim(0) == in && b.dim(0) == out, "linear dims");
  y = Tensor({out});
  const double* xd = x.data();
  const double* wd = w.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int o = 0; o < out; ++o) {
    double acc = b[o];
    const double* wrow = wd + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += wrow[i] * xd[i];
    yd[o] = acc;
  }
}

void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx,
                           Exec exec) {
  const int out = w.dim(0), in = w.dim(1);
  const double* gyd = gy.data();
  const double* wd = w.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < in; ++i) {
    double acc = 0.0;
    for (int o = 0; o < out; ++o)
      acc += wd[static_cast<std::size_t>(o) * in + i] * gyd[o];
    gxd[i] += acc;
  }
}

void linear_backward_weight(const Tensor& gy, const Tensor& x, Tensor& gw,
                            Tensor& gb, Exec exec) {
  const int out = gw.dim(0), in = gw.dim(1);
  const double* gyd = gy.data();
  const double* xd = x.data();
  double* gwd = gw.data();
  double* gbd = gb.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int o = 0; o < out; ++o) {
    const double g = gyd[o];
    double* gwrow = gwd + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) gwrow[i] += g * xd[i];
    gbd[o] += g;
  }
}

void mul_forward(const Tensor& a, const Tensor& b, Tensor& y, Exec exec) {
  check(a.same_shape(b), "mul shape mismatch");
  y = Tensor(a.shape());
  const std::size_t n = a.numel();
  const double* ad = a.data();
  const double* bd = b.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) yd[i] = ad[i] * bd[i];
}

void mul_backward(const Tensor& gy, const Tensor& other, Tensor& gx, Exec exec) {
  const std::size_t n = gy.numel();
  const double* gyd = gy.data();
  const double* od = other.data();
  double* gxd = gx.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) gxd[i] += gyd[i] * od[i];
}

void axpy(double alpha, const Tensor& x, Tensor& y, Exec exec) {
  check(x.same_shape(y), "axpy shape mismatch");
  const std::size_t n = x.numel();
  const double* xd = x.data();
  double* yd = y.data();
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) yd[i] += alpha * xd[i];
}

}  // namespace radarloc::kernels
