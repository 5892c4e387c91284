#include "egopose/motion_encoder.hpp"

#include "egopose/check.hpp"

namespace egopose {

void StaticBackbone::init(const StaticBackboneConfig& config, std::mt19937_64& rng) {
  EGOPOSE_CHECK(!config.channels.empty(), "backbone: channels empty");
  cfg = config;
  stages.clear();
  int64_t prev = 3;
  for (int64_t ch : cfg.channels) {
    nn::Conv2d c;
    c.init(prev, ch, 3, 2, 1, rng);
    stages.push_back(std::move(c));
    prev = ch;
  }
  proj.init(prev, cfg.model_dim, rng);
  bn.init(cfg.model_dim);
  apply_freeze_policy();
}

nn::Var StaticBackbone::forward(const nn::Var& frames, const nn::Ctx& ctx) {
  const Shape& fs = frames.shape();
  EGOPOSE_CHECK(fs.size() == 5 && fs[2] == 3, "backbone: frames must be (B,T,3,H,W)");
  const int64_t b = fs[0], t = fs[1], h = fs[3], w = fs[4];
  nn::Var x = ag::reshape(frames, {b * t, 3, h, w});
  for (const auto& stage : stages) {
    x = ag::leaky_relu(stage.forward(x), nn::kLeakySlope);
  }
  x = ag::global_avg_pool(x);
  x = proj.forward(x);
  x = bn.forward(x, ctx);
  return ag::reshape(x, {b, t, cfg.model_dim});
}

void StaticBackbone::collect(const std::string& prefix, nn::ParamCollector& out) {
  for (size_t i = 0; i < stages.size(); ++i) {
    stages[i].collect(prefix + ".stage" + std::to_string(i), out);
  }
  proj.collect(prefix + ".proj", out);
  bn.collect(prefix + ".bn", out);
}

void StaticBackbone::apply_freeze_policy() {
  if (!cfg.train_last_stage_only) return;
  for (size_t i = 0; i + 1 < stages.size(); ++i) stages[i].set_trainable(false);
}

void StaticBackbone::set_trainable(bool t) {
  for (auto& s : stages) s.set_trainable(t);
  proj.set_trainable(t);
  bn.set_trainable(t);
}

void TemporalEncoderConfig::validate() const {
  EGOPOSE_CHECK(num_blocks >= 1, "temporal config: need at least one block");
  EGOPOSE_CHECK(num_local_blocks >= 0 && num_local_blocks <= num_blocks,
                "temporal config: local block count out of range");
  EGOPOSE_CHECK(window_w >= 1, "temporal config: window must be at least 1");
  EGOPOSE_CHECK(model_dim % num_heads == 0, "temporal config: model_dim must divide num_heads");
  EGOPOSE_CHECK(ffn_multiplier >= 1, "temporal config: ffn multiplier must be positive");
}

Tensor build_attention_mask(const Tensor& valid, int window) {
  EGOPOSE_CHECK(valid.rank() == 2, "attention mask: valid must be (B,T)");
  const int64_t b = valid.dim(0), t = valid.dim(1);
  Tensor mask({b, t, t});
  for (int64_t bi = 0; bi < b; ++bi) {
    const float* vrow = valid.data() + bi * t;
    float* mrow = mask.data() + bi * t * t;
    for (int64_t i = 0; i < t; ++i) {
      for (int64_t j = 0; j < t; ++j) {
        const bool in_band = window < 0 || std::llabs(i - j) <= window;
        mrow[i * t + j] = (vrow[i] > 0.5f && vrow[j] > 0.5f && in_band) ? 1.0f : 0.0f;
      }
    }
  }
  return mask;
}

void TemporalEncoder::init(const TemporalEncoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  cfg = config;
  blocks.clear();
  blocks.resize(cfg.num_blocks);
  for (int i = 0; i < cfg.num_blocks; ++i) {
    blocks[i].init(cfg.model_dim, cfg.num_heads, cfg.model_dim * cfg.ffn_multiplier,
                   cfg.literal_block, rng);
  }
  apply_freeze_policy();
}

nn::Var TemporalEncoder::forward(const nn::Var& x, const Tensor& valid) const {
  nn::Var out = forward_range(x, valid, 0, cfg.num_blocks);
  return ag::mul_rowmask(out, valid);  // invalid positions output zeros
}

nn::Var TemporalEncoder::forward_range(const nn::Var& x, const Tensor& valid, int first, int last,
                                       std::vector<Tensor>* attn_out) const {
  EGOPOSE_CHECK(first >= 0 && last <= cfg.num_blocks && first <= last,
                "temporal encoder: bad block range");
  const Shape& xs = x.shape();
  EGOPOSE_CHECK(xs.size() == 3 && xs[2] == cfg.model_dim, "temporal encoder: x must be (B,T,d)");
  const Tensor local_mask = build_attention_mask(valid, cfg.window_w);
  const Tensor global_mask = build_attention_mask(valid, -1);
  nn::Var h = x;
  for (int i = first; i < last; ++i) {
    const Tensor& mask = i < cfg.num_local_blocks ? local_mask : global_mask;
    Tensor attn;
    h = blocks[i].forward(h, mask, attn_out ? &attn : nullptr);
    if (attn_out) attn_out->push_back(std::move(attn));
  }
  return h;
}

void TemporalEncoder::collect(const std::string& prefix, nn::ParamCollector& out) {
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  }
}

void TemporalEncoder::set_trainable(bool t) {
  for (auto& b : blocks) b.set_trainable(t);
}

void MotionEncoder::init(const StaticBackboneConfig& bcfg, const TemporalEncoderConfig& tcfg,
                         std::mt19937_64& rng) {
  EGOPOSE_CHECK(bcfg.model_dim == tcfg.model_dim, "motion encoder: dim mismatch");
  backbone.init(bcfg, rng);
  temporal.init(tcfg, rng);
}

nn::Var MotionEncoder::forward(const nn::Var& frames, const Tensor& valid, const nn::Ctx& ctx) {
  nn::Var f = backbone.forward(frames, ctx);
  return temporal.forward(f, valid);
}

void MotionEncoder::collect(const std::string& prefix, nn::ParamCollector& out) {
  backbone.collect(prefix + ".backbone", out);
  temporal.collect(prefix + ".temporal", out);
}

void MotionEncoder::apply_freeze_policy() {
  backbone.apply_freeze_policy();
  temporal.apply_freeze_policy();
}

}  // namespace egopose
