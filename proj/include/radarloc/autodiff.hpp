#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "radarloc/kernels.hpp"
#include "radarloc/tensor.hpp"

namespace radarloc::ad {

using kernels::Exec;

// Named trainable tensors. Gradient buffers are owned by the caller
// (see make_grad_buffers) so several tapes can run concurrently.
class ParamStore {
 public:
  int add(std::string name, Tensor init);
  int find(const std::string& name) const;  // -1 when absent
  int count() const { return static_cast<int>(values_.size()); }
  const std::string& name(int pid) const { return names_[pid]; }
  Tensor& value(int pid) { return values_[pid]; }
  const Tensor& value(int pid) const { return values_[pid]; }
  std::size_t total_size() const;
  std::vector<Tensor> make_grad_buffers() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, int> index_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are created in topological order by the op
// functions below; backward() walks them in reverse. One tape per
// forward pass; parameters enter via param().
class Tape {
 public:
  explicit Tape(Exec exec = Exec::parallel) : exec_(exec) {}

  Exec exec() const { return exec_; }

  Var constant(Tensor value);
  Var param(const ParamStore& store, int pid);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const;

  void backward(Var loss);

  // Adds the parameter gradients accumulated by backward() into `sink`
  // (one tensor per pid, aligned with the ParamStore).
  void add_param_grads(std::vector<Tensor>& sink) const;

  using BackwardFn = std::function<void(Tape&, int)>;
  Var make_node(Tensor value, std::vector<int> parents, BackwardFn bwd);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  Tensor& grad_ref(int id);
  const Tensor& value_at(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::vector<int> parents;
    BackwardFn bwd;
    bool requires_grad = false;
    bool grad_live = false;
    int pid = -1;
  };
  std::vector<Node> nodes_;
  Exec exec_;
  bool ran_backward_ = false;
};

// --- tensor ops -----------------------------------------------------------

Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad);
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var upsample_nearest2(Tape& t, Var x);
Var avgpool2(Tape& t, Var x);
Var global_avgpool(Tape& t, Var x);
Var linear(Tape& t, Var x, Var w, Var b);
Var concat_channels(Tape& t, const std::vector<Var>& xs);
Var broadcast3(Tape& t, Var x);  // [1,H,W] -> [3,H,W]
Var flatten(Tape& t, Var x);     // any shape -> [numel], row-major copy
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double s);
Var mean_of(Tape& t, const std::vector<Var>& xs);
Var l1_norm(Tape& t, Var x);  // -> scalar; subgradient sign(x)
Var exp_neg(Tape& t, Var x);  // elementwise exp(-x)

// --- quaternion ops (components ordered [u, x, y, z]) ----------------------

Var quat_exp(Tape& t, Var w3);          // [3] -> [4], unit output
Var quat_log_canon(Tape& t, Var q4);    // [4] -> [3]; canonicalizes u >= 0
Var quat_mul(Tape& t, Var a4, Var b4);  // Hamilton product
Var quat_conj(Tape& t, Var q4);
Var pure_quat(Tape& t, Var v3);  // [3] -> [0, v]
Var quat_vec(Tape& t, Var q4);   // vector part

}  // namespace radarloc::ad
