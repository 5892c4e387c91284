#pragma once

#include <random>
#include <string>
#include <vector>

#include "egopose/autograd.hpp"
#include "egopose/tensor.hpp"

namespace egopose::nn {

using ag::Var;

/// Trainable tensor. `trainable=false` hides it from the optimizer and from
/// gradient propagation (freeze contract: bits never change).
struct Param {
  Var var;
  bool trainable = true;

  void init(Tensor t, bool requires_grad = true) {
    var = Var(std::move(t), requires_grad);
  }
  void set_trainable(bool t) {
    trainable = t;
    var.set_requires_grad(t);
  }
};

struct NamedParam {
  std::string name;
  Param* param;
};

/// Non-trainable persistent state (batch-norm running stats).
struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

struct ParamCollector {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;

  void add(const std::string& name, Param& p) { params.push_back({name, &p}); }
  void add_buffer(const std::string& name, Tensor& t) { buffers.push_back({name, &t}); }
};

/// Forward-pass context: training toggles dropout/batch-norm behavior.
struct Ctx {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// He-style uniform init, fan_in derived from the weight shape.
Tensor init_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng);

struct Linear {
  Param weight;  // (d_in, d_out)
  Param bias;    // (d_out)

  void init(int64_t d_in, int64_t d_out, std::mt19937_64& rng);
  Var forward(const Var& x) const { return ag::affine_lastdim(x, weight.var, bias.var); }
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

struct Conv2d {
  Param weight;  // (co, ci, kh, kw)
  Param bias;    // (co)
  int stride = 1;
  int pad = 0;

  void init(int64_t ci, int64_t co, int kernel, int stride, int pad, std::mt19937_64& rng);
  Var forward(const Var& x) const { return ag::conv2d(x, weight.var, bias.var, stride, pad); }
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

struct LayerNorm {
  Param gamma;
  Param beta;

  void init(int64_t d);
  Var forward(const Var& x) const { return ag::layer_norm(x, gamma.var, beta.var); }
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

struct BatchNorm1d {
  Param gamma;
  Param beta;
  Tensor running_mean;
  Tensor running_var;

  void init(int64_t d);
  Var forward(const Var& x, const Ctx& ctx) {
    return ag::batch_norm1d(x, gamma.var, beta.var, running_mean, running_var, ctx.training);
  }
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

/// Multi-head attention. Queries and keys/values may come from different
/// streams (cross-attention). `mask`, when defined, holds 0/1 validity with
/// shape (batch, q_len, kv_len); it is shared across heads.
struct MultiHeadAttention {
  Linear proj_q, proj_k, proj_v, proj_out;
  int num_heads = 4;
  int64_t model_dim = 0;

  void init(int64_t dim, int heads, std::mt19937_64& rng);
  /// q (B,S,d), kv (B,L,d) -> (B,S,d). Set attn_out to capture attention
  /// probabilities (B*heads, S, L) for inspection.
  Var forward(const Var& q, const Var& kv, const Tensor& mask, Tensor* attn_out = nullptr) const;
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

struct FeedForward {
  Linear fc1, fc2;

  void init(int64_t dim, int64_t hidden, std::mt19937_64& rng);
  Var forward(const Var& x) const { return fc2.forward(ag::gelu(fc1.forward(x))); }
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

/// Pre-norm transformer encoder block over (B,T,d) with an attention validity
/// mask (B,T,T). `literal` drops the identity residuals and layer norms:
/// z_i = Attn(z_{i-1}) + FFN(z_{i-1}).
struct TransformerBlock {
  LayerNorm ln_attn, ln_ffn;
  MultiHeadAttention attn;
  FeedForward ffn;
  bool literal = false;

  void init(int64_t dim, int heads, int64_t ffn_hidden, bool literal_form, std::mt19937_64& rng);
  Var forward(const Var& x, const Tensor& mask, Tensor* attn_out = nullptr) const;
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

// 3x3 + 3x3 residual pair, stride 1.
struct ResidualConvBlock {
  Conv2d conv1, conv2;

  void init(int64_t channels, std::mt19937_64& rng);
  Var forward(const Var& x) const;
  void collect(const std::string& prefix, ParamCollector& out);
  void set_trainable(bool t);
};

constexpr float kLeakySlope = 0.01f;

}  // namespace egopose::nn
