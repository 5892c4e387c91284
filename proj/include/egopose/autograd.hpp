#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "egopose/tensor.hpp"

// Define-by-run reverse-mode autodiff over float32 tensors. Each op builds a
// node whose backward closure accumulates into the parents' grad buffers.
namespace egopose::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // materialized lazily, same shape as value
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return grad.defined() && grad.numel() == value.numel(); }
  Tensor& ensure_grad() {
    if (!has_grad()) grad = Tensor(value.shape());
    return grad;
  }
  void accum_grad(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& val() const { return node_->value; }
  Tensor& val() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Tensor& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_ && node_->has_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  void zero_grad() {
    if (node_) node_->grad = Tensor();
  }
  NodePtr node() const { return node_; }

  static Var from_node(NodePtr n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  NodePtr node_;
};

/// Seeds d(root)/d(root) = 1 (root must be scalar) and runs the tape.
void backward(const Var& root);

Var make_op(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backward_fn);

// ---- primitive ops ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);           // hadamard, same shape
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);

/// x[..., d_in] @ w[d_in, d_out] + b[d_out]; pass undefined b to skip bias.
Var affine_lastdim(const Var& x, const Var& w, const Var& b);

/// Batched matmul over leading dim g: a (g,m,k) @ b (g,k,n) -> (g,m,n).
/// trans_b treats b as (g,n,k).
Var bmm(const Var& a, const Var& b, bool trans_b = false);

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var bilinear_resize(const Var& x, int out_h, int out_w);
Var global_avg_pool(const Var& x);  // (n,c,h,w) -> (n,c)

Var leaky_relu(const Var& x, float slope);
Var gelu(const Var& x);
Var sigmoid(const Var& x);

/// Softmax over the last dim of scores (g,m,n). mask, if defined, holds 0/1
/// with shape (g,m,n) or (g,n); rows with no valid key yield all zeros.
Var masked_softmax(const Var& scores, const Tensor& mask);

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);

/// Batch norm over rows of x (n,c). Running stats are plain module state.
Var batch_norm1d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, float momentum = 0.1f, float eps = 1e-5f);

Var dropout(const Var& x, float p, bool training, std::mt19937_64& rng);

Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<int>& dims);
Var concat_lastdim(const Var& a, const Var& b);
/// Insert a new axis at `axis` and repeat `count` times. Backward sums.
Var tile_newaxis(const Var& x, int axis, int64_t count);
/// Multiply rows of x (..., rows, d) by mask (..., rows); mask is constant.
Var mul_rowmask(const Var& x, const Tensor& mask);

Var mean_all(const Var& x);
Var sum_all(const Var& x);

// ---- finite differences (test support) ----
/// Central finite-difference gradient of f at x, step h. Used by op tests.
Tensor finite_diff(const std::function<float(const Tensor&)>& f, const Tensor& x, float h);

}  // namespace egopose::ag
