#pragma once

#include "radarloc/tensor.hpp"

namespace radarloc::kernels {

// Every kernel has an OpenMP-parallel path and a serial reference path.
// Both accumulate per output element in the same scalar order, so results
// are bitwise identical for any thread count.
enum class Exec { serial, parallel };

// y = conv2d(x, w) + b.  x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout],
// y [Cout,Ho,Wo] with Ho = (H + 2*pad - kh)/stride + 1.
void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& y, Exec exec);

// gx += dL/dx given gy = dL/dy.
void conv2d_backward_input(const Tensor& gy, const Tensor& w, int stride,
                           int pad, Tensor& gx, Exec exec);

// gw += dL/dw, gb += dL/db.
void conv2d_backward_weight(const Tensor& gy, const Tensor& x, int stride,
                            int pad, Tensor& gw, Tensor& gb, Exec exec);

void relu_forward(const Tensor& x, Tensor& y, Exec exec);
void relu_backward(const Tensor& x, const Tensor& gy, Tensor& gx, Exec exec);

void sigmoid_forward(const Tensor& x, Tensor& y, Exec exec);
// takes the forward output (grad = y*(1-y)*gy)
void sigmoid_backward(const Tensor& y, const Tensor& gy, Tensor& gx, Exec exec);

// [C,H,W] -> [C,2H,2W], nearest neighbor
void upsample2_forward(const Tensor& x, Tensor& y, Exec exec);
void upsample2_backward(const Tensor& gy, Tensor& gx, Exec exec);

// [C,H,W] -> [C,H/2,W/2], 2x2 mean (H, W even)
void avgpool2_forward(const Tensor& x, Tensor& y, Exec exec);
void avgpool2_backward(const Tensor& gy, Tensor& gx, Exec exec);

// [C,H,W] -> [C]
void global_avgpool_forward(const Tensor& x, Tensor& y, Exec exec);
void global_avgpool_backward(const Tensor& gy, const std::vector<int>& xshape,
                             Tensor& gx, Exec exec);

// y = W x + b.  W [out,in], x [in], b [out].
void linear_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    Tensor& y, Exec exec);
void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx,
                           Exec exec);
void linear_backward_weight(const Tensor& gy, const Tensor& x, Tensor& gw,
                            Tensor& gb, Exec exec);

void mul_forward(const Tensor& a, const Tensor& b, Tensor& y, Exec exec);

// gx += gy * other
void mul_backward(const Tensor& gy, const Tensor& other, Tensor& gx, Exec exec);

// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y, Exec exec);

}  // namespace radarloc::kernels
