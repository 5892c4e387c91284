#include "egopose/nn.hpp"

#include <cmath>

namespace egopose::nn {

Tensor init_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
  Tensor t(shape);
  const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = dist(rng);
  return t;
}

void Linear::init(int64_t d_in, int64_t d_out, std::mt19937_64& rng) {
  weight.init(init_uniform({d_in, d_out}, d_in, rng));
  bias.init(Tensor({d_out}));
}

void Linear::collect(const std::string& prefix, ParamCollector& out) {
  out.add(prefix + ".w", weight);
  out.add(prefix + ".b", bias);
}

void Linear::set_trainable(bool t) {
  weight.set_trainable(t);
  bias.set_trainable(t);
}

void Conv2d::init(int64_t ci, int64_t co, int kernel, int stride_, int pad_, std::mt19937_64& rng) {
  stride = stride_;
  pad = pad_;
  weight.init(init_uniform({co, ci, kernel, kernel}, ci * kernel * kernel, rng));
  bias.init(Tensor({co}));
}

void Conv2d::collect(const std::string& prefix, ParamCollector& out) {
  out.add(prefix + ".w", weight);
  out.add(prefix + ".b", bias);
}

void Conv2d::set_trainable(bool t) {
  weight.set_trainable(t);
  bias.set_trainable(t);
}

void LayerNorm::init(int64_t d) {
  gamma.init(Tensor({d}, 1.0f));
  beta.init(Tensor({d}));
}

void LayerNorm::collect(const std::string& prefix, ParamCollector& out) {
  out.add(prefix + ".g", gamma);
  out.add(prefix + ".b", beta);
}

void LayerNorm::set_trainable(bool t) {
  gamma.set_trainable(t);
  beta.set_trainable(t);
}

void BatchNorm1d::init(int64_t d) {
  gamma.init(Tensor({d}, 1.0f));
  beta.init(Tensor({d}));
  running_mean = Tensor({d});
  running_var = Tensor({d}, 1.0f);
}

void BatchNorm1d::collect(const std::string& prefix, ParamCollector& out) {
  out.add(prefix + ".g", gamma);
  out.add(prefix + ".b", beta);
  out.add_buffer(prefix + ".running_mean", running_mean);
  out.add_buffer(prefix + ".running_var", running_var);
}

void BatchNorm1d::set_trainable(bool t) {
  gamma.set_trainable(t);
  beta.set_trainable(t);
}

void MultiHeadAttention::init(int64_t dim, int heads, std::mt19937_64& rng) {
  EGOPOSE_CHECK(dim % heads == 0, "attention: model_dim must divide num_heads");
  model_dim = dim;
  num_heads = heads;
  proj_q.init(dim, dim, rng);
  proj_k.init(dim, dim, rng);
  proj_v.init(dim, dim, rng);
  proj_out.init(dim, dim, rng);
}

Var MultiHeadAttention::forward(const Var& q_in, const Var& kv_in, const Tensor& mask,
                                Tensor* attn_out) const {
  const Shape& qs = q_in.shape();
  const Shape& ks = kv_in.shape();
  EGOPOSE_CHECK(qs.size() == 3 && ks.size() == 3 && qs[0] == ks[0], "attention: bad shapes");
  const int64_t b = qs[0], s = qs[1], l = ks[1];
  const int64_t h = num_heads;
  const int64_t dh = model_dim / h;

  Var q = proj_q.forward(q_in);
  Var k = proj_k.forward(kv_in);
  Var v = proj_v.forward(kv_in);

  // (B,S,d) -> (B*H, S, dh)
  auto to_heads = [&](const Var& x, int64_t len) {
    Var r = ag::reshape(x, {b, len, h, dh});
    r = ag::permute(r, {0, 2, 1, 3});
    return ag::reshape(r, {b * h, len, dh});
  };
  q = to_heads(q, s);
  k = to_heads(k, l);
  v = to_heads(v, l);

  Var scores = ag::bmm(q, k, /*trans_b=*/true);
  scores = ag::scale(scores, 1.0f / std::sqrt(static_cast<float>(dh)));
  Var probs = ag::masked_softmax(scores, mask);
  if (attn_out) *attn_out = probs.val();
  Var ctx = ag::bmm(probs, v, /*trans_b=*/false);

  ctx = ag::reshape(ctx, {b, h, s, dh});
  ctx = ag::permute(ctx, {0, 2, 1, 3});
  ctx = ag::reshape(ctx, {b, s, model_dim});
  return proj_out.forward(ctx);
}

void MultiHeadAttention::collect(const std::string& prefix, ParamCollector& out) {
  proj_q.collect(prefix + ".q", out);
  proj_k.collect(prefix + ".k", out);
  proj_v.collect(prefix + ".v", out);
  proj_out.collect(prefix + ".o", out);
}

void MultiHeadAttention::set_trainable(bool t) {
  proj_q.set_trainable(t);
  proj_k.set_trainable(t);
  proj_v.set_trainable(t);
  proj_out.set_trainable(t);
}

void FeedForward::init(int64_t dim, int64_t hidden, std::mt19937_64& rng) {
  fc1.init(dim, hidden, rng);
  fc2.init(hidden, dim, rng);
}

void FeedForward::collect(const std::string& prefix, ParamCollector& out) {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

void FeedForward::set_trainable(bool t) {
  fc1.set_trainable(t);
  fc2.set_trainable(t);
}

void TransformerBlock::init(int64_t dim, int heads, int64_t ffn_hidden, bool literal_form,
                            std::mt19937_64& rng) {
  literal = literal_form;
  ln_attn.init(dim);
  ln_ffn.init(dim);
  attn.init(dim, heads, rng);
  ffn.init(dim, ffn_hidden, rng);
}

Var TransformerBlock::forward(const Var& x, const Tensor& mask, Tensor* attn_out) const {
  if (literal) {
    // z_i = Attn(z_{i-1}) + FFN(z_{i-1})
    Var a = attn.forward(x, x, mask, attn_out);
    Var f = ffn.forward(x);
    return ag::add(a, f);
  }
  Var normed = ln_attn.forward(x);
  Var h = ag::add(x, attn.forward(normed, normed, mask, attn_out));
  return ag::add(h, ffn.forward(ln_ffn.forward(h)));
}

void TransformerBlock::collect(const std::string& prefix, ParamCollector& out) {
  ln_attn.collect(prefix + ".ln1", out);
  ln_ffn.collect(prefix + ".ln2", out);
  attn.collect(prefix + ".attn", out);
  ffn.collect(prefix + ".ffn", out);
}

void TransformerBlock::set_trainable(bool t) {
  ln_attn.set_trainable(t);
  ln_ffn.set_trainable(t);
  attn.set_trainable(t);
  ffn.set_trainable(t);
}

void ResidualConvBlock::init(int64_t channels, std::mt19937_64& rng) {
  conv1.init(channels, channels, 3, 1, 1, rng);
  conv2.init(channels, channels, 3, 1, 1, rng);
}

Var ResidualConvBlock::forward(const Var& x) const {
  Var h = ag::leaky_relu(conv1.forward(x), kLeakySlope);
  h = conv2.forward(h);
  return ag::leaky_relu(ag::add(x, h), kLeakySlope);
}

void ResidualConvBlock::collect(const std::string& prefix, ParamCollector& out) {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
}

void ResidualConvBlock::set_trainable(bool t) {
  conv1.set_trainable(t);
  conv2.set_trainable(t);
}

}  // namespace egopose::nn
