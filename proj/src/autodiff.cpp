#include "radarloc/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace radarloc::ad {

using kernels::axpy;

// --- ParamStore -------------------------------------------------------------

int ParamStore::add(std::string name, Tensor init) {
  if (index_.count(name))
    throw std::invalid_argument("ParamStore: duplicate name " + name);
  int pid = count();
  index_.emplace(name, pid);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return pid;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const Tensor& v : values_) n += v.numel();
  return n;
}

std::vector<Tensor> ParamStore::make_grad_buffers() const {
  std::vector<Tensor> g;
  g.reserve(values_.size());
  for (const Tensor& v : values_) g.emplace_back(v.shape());
  return g;
}

// --- Tape -------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const ParamStore& store, int pid) {
  Node n;
  n.value = store.value(pid);
  n.requires_grad = true;
  n.pid = pid;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make_node(Tensor value, std::vector<int> parents, BackwardFn bwd) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents) {
    if (p < 0 || p >= static_cast<int>(nodes_.size()))
      throw std::logic_error("Tape: parent from another tape");
    if (nodes_[p].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor(n.value.shape());
    n.grad_live = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  if (!ran_backward_) throw std::logic_error("Tape: backward() not run");
  const Node& n = nodes_[v.id];
  if (!n.grad_live)
    throw std::logic_error("Tape: node not reached by backward()");
  return n.grad;
}

void Tape::backward(Var loss) {
  if (ran_backward_) throw std::logic_error("Tape: backward() ran twice");
  ran_backward_ = true;
  const Node& top = nodes_[loss.id];
  if (top.value.numel() != 1)
    throw std::invalid_argument("Tape: backward() needs a scalar");
  if (!top.requires_grad) return;
  grad_ref(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.grad_live || !n.bwd) continue;
    n.bwd(*this, id);
  }
}

void Tape::add_param_grads(std::vector<Tensor>& sink) const {
  for (const Node& n : nodes_) {
    if (n.pid < 0 || !n.grad_live) continue;
    axpy(1.0, n.grad, sink[n.pid], exec_);
  }
}

// --- tensor ops ---------------------------------------------------------

Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad) {
  Tensor y;
  kernels::conv2d_forward(t.value(x), t.value(w), t.value(b), stride, pad, y,
                          t.exec());
  const int xi = x.id, wi = w.id, bi = b.id;
  return t.make_node(
      std::move(y), {xi, wi, bi}, [xi, wi, bi, stride, pad](Tape& tp, int self) {
        const Tensor& gy = tp.grad_ref(self);
        if (tp.requires_grad(xi))
          kernels::conv2d_backward_input(gy, tp.value_at(wi), stride, pad,
                                         tp.grad_ref(xi), tp.exec());
        const bool nw = tp.requires_grad(wi), nb = tp.requires_grad(bi);
        if (nw && nb) {
          kernels::conv2d_backward_weight(gy, tp.value_at(xi), stride, pad,
                                          tp.grad_ref(wi), tp.grad_ref(bi),
                                          tp.exec());
        } else if (nw || nb) {
          Tensor tw(tp.value_at(wi).shape());
          Tensor tb(tp.value_at(bi).shape());
          kernels::conv2d_backward_weight(gy, tp.value_at(xi), stride, pad,
                                          nw ? tp.grad_ref(wi) : tw,
                                          nb ? tp.grad_ref(bi) : tb, tp.exec());
        }
      });
}

Var relu(Tape& t, Var x) {
  Tensor y;
  kernels::relu_forward(t.value(x), y, t.exec());
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    kernels::relu_backward(tp.value_at(xi), tp.grad_ref(self), tp.grad_ref(xi),
                           tp.exec());
  });
}

Var sigmoid(Tape& t, Var x) {
  Tensor y;
  kernels::sigmoid_forward(t.value(x), y, t.exec());
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    kernels::sigmoid_backward(tp.value_at(self), tp.grad_ref(self),
                              tp.grad_ref(xi), tp.exec());
  });
}

Var upsample_nearest2(Tape& t, Var x) {
  Tensor y;
  kernels::upsample2_forward(t.value(x), y, t.exec());
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    kernels::upsample2_backward(tp.grad_ref(self), tp.grad_ref(xi), tp.exec());
  });
}

Var avgpool2(Tape& t, Var x) {
  Tensor y;
  kernels::avgpool2_forward(t.value(x), y, t.exec());
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    kernels::avgpool2_backward(tp.grad_ref(self), tp.grad_ref(xi), tp.exec());
  });
}

Var global_avgpool(Tape& t, Var x) {
  Tensor y;
  kernels::global_avgpool_forward(t.value(x), y, t.exec());
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    kernels::global_avgpool_backward(tp.grad_ref(self),
                                     tp.value_at(xi).shape(), tp.grad_ref(xi),
                                     tp.exec());
  });
}

Var linear(Tape& t, Var x, Var w, Var b) {
  Tensor y;
  kernels::linear_forward(t.value(x), t.value(w), t.value(b), y, t.exec());
  const int xi = x.id, wi = w.id, bi = b.id;
  return t.make_node(std::move(y), {xi, wi, bi}, [xi, wi, bi](Tape& tp,
                                                              int self) {
    const Tensor& gy = tp.grad_ref(self);
    if (tp.requires_grad(xi))
      kernels::linear_backward_input(gy, tp.value_at(wi), tp.grad_ref(xi),
                                     tp.exec());
    const bool nw = tp.requires_grad(wi), nb = tp.requires_grad(bi);
    if (nw && nb) {
      kernels::linear_backward_weight(gy, tp.value_at(xi), tp.grad_ref(wi),
                                      tp.grad_ref(bi), tp.exec());
    } else if (nw || nb) {
      Tensor tw(tp.value_at(wi).shape());
      Tensor tb(tp.value_at(bi).shape());
      kernels::linear_backward_weight(gy, tp.value_at(xi),
                                      nw ? tp.grad_ref(wi) : tw,
                                      nb ? tp.grad_ref(bi) : tb, tp.exec());
    }
  });
}

Var concat_channels(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
  const Tensor& first = t.value(xs[0]);
  if (first.ndim() != 3)
    throw std::invalid_argument("concat_channels: expects [C,H,W]");
  const int h = first.dim(1), w = first.dim(2);
  int ctotal = 0;
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (Var v : xs) {
    const Tensor& xv = t.value(v);
    if (xv.ndim() != 3 || xv.dim(1) != h || xv.dim(2) != w)
      throw std::invalid_argument("concat_channels: mismatched spatial size");
    ctotal += xv.dim(0);
    ids.push_back(v.id);
  }
  Tensor y({ctotal, h, w});
  std::size_t off = 0;
  for (Var v : xs) {
    const Tensor& xv = t.value(v);
    for (std::size_t i = 0; i < xv.numel(); ++i) y[off + i] = xv[i];
    off += xv.numel();
  }
  std::vector<int> parents = ids;
  return t.make_node(std::move(y), std::move(parents), [ids](Tape& tp,
                                                             int self) {
    const Tensor& gy = tp.grad_ref(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = tp.value_at(id).numel();
      if (tp.requires_grad(id)) {
        Tensor& gx = tp.grad_ref(id);
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy[off + i];
      }
      off += n;
    }
  });
}

Var broadcast3(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  if (xv.ndim() != 3 || xv.dim(0) != 1)
    throw std::invalid_argument("broadcast3: expects [1,H,W]");
  Tensor y({3, xv.dim(1), xv.dim(2)});
  const std::size_t plane = xv.numel();
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] = xv[i];
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& gy = tp.grad_ref(self);
    Tensor& gx = tp.grad_ref(xi);
    const std::size_t plane = gx.numel();
    for (std::size_t i = 0; i < plane; ++i)
      gx[i] += gy[i] + gy[plane + i] + gy[2 * plane + i];
  });
}

Var flatten(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor y({static_cast<int>(xv.numel())});
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = xv[i];
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& gy = tp.grad_ref(self);
    Tensor& gx = tp.grad_ref(xi);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = av[i] + bv[i];
  const int ai = a.id, bi = b.id;
  return t.make_node(std::move(y), {ai, bi}, [ai, bi](Tape& tp, int self) {
    const Tensor& gy = tp.grad_ref(self);
    if (tp.requires_grad(ai)) axpy(1.0, gy, tp.grad_ref(ai), tp.exec());
    if (tp.requires_grad(bi)) axpy(1.0, gy, tp.grad_ref(bi), tp.exec());
  });
}

Var sub(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = av[i] - bv[i];
  const int ai = a.id, bi = b.id;
  return t.make_node(std::move(y), {ai, bi}, [ai, bi](Tape& tp, int self) {
    const Tensor& gy = tp.grad_ref(self);
    if (tp.requires_grad(ai)) axpy(1.0, gy, tp.grad_ref(ai), tp.exec());
    if (tp.requires_grad(bi)) axpy(-1.0, gy, tp.grad_ref(bi), tp.exec());
  });
}

Var mul(Tape& t, Var a, Var b) {
  Tensor y;
  kernels::mul_forward(t.value(a), t.value(b), y, t.exec());
  const int ai = a.id, bi = b.id;
  return t.make_node(std::move(y), {ai, bi}, [ai, bi](Tape& tp, int self) {
    const Tensor& gy = tp.grad_ref(self);
    if (tp.requires_grad(ai))
      kernels::mul_backward(gy, tp.value_at(bi), tp.grad_ref(ai), tp.exec());
    if (tp.requires_grad(bi))
      kernels::mul_backward(gy, tp.value_at(ai), tp.grad_ref(bi), tp.exec());
  });
}

Var scale(Tape& t, Var x, double s) {
  const Tensor& xv = t.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = s * xv[i];
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi, s](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    axpy(s, tp.grad_ref(self), tp.grad_ref(xi), tp.exec());
  });
}

Var mean_of(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty input");
  const Tensor& first = t.value(xs[0]);
  Tensor y(first.shape());
  std::vector<int> ids;
  for (Var v : xs) {
    const Tensor& xv = t.value(v);
    if (!xv.same_shape(first))
      throw std::invalid_argument("mean_of: shape mismatch");
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += xv[i];
    ids.push_back(v.id);
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= inv;
  std::vector<int> parents = ids;
  return t.make_node(std::move(y), std::move(parents),
                     [ids, inv](Tape& tp, int self) {
                       const Tensor& gy = tp.grad_ref(self);
                       for (int id : ids)
                         if (tp.requires_grad(id))
                           axpy(inv, gy, tp.grad_ref(id), tp.exec());
                     });
}

Var l1_norm(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < xv.numel(); ++i) s += std::abs(xv[i]);
  const int xi = x.id;
  return t.make_node(Tensor::scalar(s), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    const double g = tp.grad_ref(self)[0];
    const Tensor& xv = tp.value_at(xi);
    Tensor& gx = tp.grad_ref(xi);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      if (xv[i] > 0.0)
        gx[i] += g;
      else if (xv[i] < 0.0)
        gx[i] -= g;
    }
  });
}

Var exp_neg(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::exp(-xv[i]);
  const int xi = x.id;
  return t.make_node(std::move(y), {xi}, [xi](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& gy = tp.grad_ref(self);
    const Tensor& yv = tp.value_at(self);
    Tensor& gx = tp.grad_ref(xi);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] -= gy[i] * yv[i];
  });
}

// --- quaternion ops ----------------------------------------------------
//
// Components are [u, x, y, z].  quat_exp maps a rotation-log vector w to
// the unit quaternion [cos|w|, sin|w|/|w| * w]; quat_log_canon is its
// inverse extended scale-invariantly via atan2, after flipping the input
// onto the u >= 0 hemisphere.  Both use series near the singular points.

namespace {

void check_len(const Tensor& v, int n, const char* who) {
  if (v.ndim() != 1 || v.dim(0) != n)
    throw std::invalid_argument(std::string(who) + ": wrong shape " +
                                Tensor::shape_string(v.shape()));
}

// sign applied to put q on the canonical hemisphere
double canon_sign(const Tensor& q) {
  if (q[0] > 0.0) return 1.0;
  if (q[0] < 0.0) return -1.0;
  for (int i = 1; i < 4; ++i) {
    if (q[i] > 0.0) return 1.0;
    if (q[i] < 0.0) return -1.0;
  }
  return 1.0;
}

}  // namespace

Var quat_exp(Tape& t, Var w3) {
  const Tensor& w = t.value(w3);
  check_len(w, 3, "quat_exp");
  const double th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
  const double th = std::sqrt(th2);
  double snc;  // sin(th)/th
  if (th < 1e-4)
    snc = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
  else
    snc = std::sin(th) / th;
  Tensor q({4});
  q[0] = std::cos(th);
  for (int i = 0; i < 3; ++i) q[i + 1] = snc * w[i];
  const int wi = w3.id;
  return t.make_node(std::move(q), {wi}, [wi](Tape& tp, int self) {
    if (!tp.requires_grad(wi)) return;
    const Tensor& g = tp.grad_ref(self);
    const Tensor& w = tp.value_at(wi);
    const Tensor& q = tp.value_at(self);
    Tensor& gw = tp.grad_ref(wi);
    const double th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    const double th = std::sqrt(th2);
    double snc, c2;  // c2 = (cos th - sinc th) / th^2
    if (th < 1e-4) {
      snc = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
      c2 = -1.0 / 3.0 + th2 / 30.0;
    } else {
      snc = std::sin(th) / th;
      c2 = (std::cos(th) - snc) / th2;
    }
    double gv_dot_w = 0.0;
    for (int i = 0; i < 3; ++i) gv_dot_w += g[i + 1] * w[i];
    for (int j = 0; j < 3; ++j)
      gw[j] += -g[0] * q[j + 1] + snc * g[j + 1] + c2 * w[j] * gv_dot_w;
  });
}

Var quat_log_canon(Tape& t, Var q4) {
  const Tensor& qin = t.value(q4);
  check_len(qin, 4, "quat_log_canon");
  const double sg = canon_sign(qin);
  const double u = sg * qin[0];
  const double vx = sg * qin[1], vy = sg * qin[2], vz = sg * qin[3];
  const double a2 = vx * vx + vy * vy + vz * vz;
  const double a = std::sqrt(a2);
  double k;  // atan2(a, u) / a, extended through a = 0
  if (a < 1e-6) {
    if (u <= 0.0)
      throw std::domain_error("quat_log_canon: zero quaternion");
    k = 1.0 / u - a2 / (3.0 * u * u * u);
  } else {
    k = std::atan2(a, u) / a;
  }
  Tensor w({3});
  w[0] = k * vx;
  w[1] = k * vy;
  w[2] = k * vz;
  const int qi = q4.id;
  return t.make_node(std::move(w), {qi}, [qi, sg](Tape& tp, int self) {
    if (!tp.requires_grad(qi)) return;
    const Tensor& g = tp.grad_ref(self);
    const Tensor& qin = tp.value_at(qi);
    Tensor& gq = tp.grad_ref(qi);
    const double u = sg * qin[0];
    const double v[3] = {sg * qin[1], sg * qin[2], sg * qin[3]};
    const double a2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    const double a = std::sqrt(a2);
    const double n2 = u * u + a2;
    double k, c;  // dw_i/dv_j = k d_ij + c v_i v_j;  dw_i/du = -v_i / n2
    if (a < 1e-6) {
      const double u3 = u * u * u;
      k = 1.0 / u - a2 / (3.0 * u3);
      c = -2.0 / (3.0 * u3) + 4.0 * a2 / (5.0 * u3 * u * u);
    } else {
      k = std::atan2(a, u) / a;
      c = (u / n2 - k) / a2;
    }
    double g_dot_v = 0.0;
    for (int i = 0; i < 3; ++i) g_dot_v += g[i] * v[i];
    gq[0] += sg * (-g_dot_v / n2);
    for (int j = 0; j < 3; ++j) gq[j + 1] += sg * (k * g[j] + c * v[j] * g_dot_v);
  });
}

namespace {

// r = H(a) b: left-multiplication matrix of the Hamilton product
void hamilton_left(const double* a, double m[4][4]) {
  m[0][0] = a[0]; m[0][1] = -a[1]; m[0][2] = -a[2]; m[0][3] = -a[3];
  m[1][0] = a[1]; m[1][1] = a[0];  m[1][2] = -a[3]; m[1][3] = a[2];
  m[2][0] = a[2]; m[2][1] = a[3];  m[2][2] = a[0];  m[2][3] = -a[1];
  m[3][0] = a[3]; m[3][1] = -a[2]; m[3][2] = a[1];  m[3][3] = a[0];
}

// r = H(b) a: right-multiplication matrix
void hamilton_right(const double* b, double m[4][4]) {
  m[0][0] = b[0]; m[0][1] = -b[1]; m[0][2] = -b[2]; m[0][3] = -b[3];
  m[1][0] = b[1]; m[1][1] = b[0];  m[1][2] = b[3];  m[1][3] = -b[2];
  m[2][0] = b[2]; m[2][1] = -b[3]; m[2][2] = b[0];  m[2][3] = b[1];
  m[3][0] = b[3]; m[3][1] = b[2];  m[3][2] = -b[1]; m[3][3] = b[0];
}

}  // namespace

Var quat_mul(Tape& t, Var a4, Var b4) {
  const Tensor& a = t.value(a4);
  const Tensor& b = t.value(b4);
  check_len(a, 4, "quat_mul");
  check_len(b, 4, "quat_mul");
  Tensor r({4});
  double m[4][4];
  hamilton_left(a.data(), m);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i] += m[i][j] * b[j];
  const int ai = a4.id, bi = b4.id;
  return t.make_node(std::move(r), {ai, bi}, [ai, bi](Tape& tp, int self) {
    const Tensor& g = tp.grad_ref(self);
    double m[4][4];
    if (tp.requires_grad(ai)) {
      hamilton_right(tp.value_at(bi).data(), m);  // dr/da
      Tensor& ga = tp.grad_ref(ai);
      for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) ga[j] += m[i][j] * g[i];
    }
    if (tp.requires_grad(bi)) {
      hamilton_left(tp.value_at(ai).data(), m);  // dr/db
      Tensor& gb = tp.grad_ref(bi);
      for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) gb[j] += m[i][j] * g[i];
    }
  });
}

Var quat_conj(Tape& t, Var q4) {
  const Tensor& q = t.value(q4);
  check_len(q, 4, "quat_conj");
  Tensor r({4});
  r[0] = q[0];
  for (int i = 1; i < 4; ++i) r[i] = -q[i];
  const int qi = q4.id;
  return t.make_node(std::move(r), {qi}, [qi](Tape& tp, int self) {
    if (!tp.requires_grad(qi)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& gq = tp.grad_ref(qi);
    gq[0] += g[0];
    for (int i = 1; i < 4; ++i) gq[i] -= g[i];
  });
}

Var pure_quat(Tape& t, Var v3) {
  const Tensor& v = t.value(v3);
  check_len(v, 3, "pure_quat");
  Tensor q({4});
  for (int i = 0; i < 3; ++i) q[i + 1] = v[i];
  const int vi = v3.id;
  return t.make_node(std::move(q), {vi}, [vi](Tape& tp, int self) {
    if (!tp.requires_grad(vi)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& gv = tp.grad_ref(vi);
    for (int i = 0; i < 3; ++i) gv[i] += g[i + 1];
  });
}

Var quat_vec(Tape& t, Var q4) {
  const Tensor& q = t.value(q4);
  check_len(q, 4, "quat_vec");
  Tensor v({3});
  for (int i = 0; i < 3; ++i) v[i] = q[i + 1];
  const int qi = q4.id;
  return t.make_node(std::move(v), {qi}, [qi](Tape& tp, int self) {
    if (!tp.requires_grad(qi)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& gq = tp.grad_ref(qi);
    for (int i = 0; i < 3; ++i) gq[i + 1] += g[i];
  });
}

}  // namespace radarloc::ad
