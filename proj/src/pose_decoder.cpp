#include "egopose/pose_decoder.hpp"

#include "egopose/check.hpp"
#include "egopose/kernels.hpp"

namespace egopose {

const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::full: return "full";
    case FusionMode::spatial_only: return "spatial_only";
    case FusionMode::motion_only: return "motion_only";
    case FusionMode::concat_only: return "concat_only";
  }
  return "full";
}

FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "full") return FusionMode::full;
  if (name == "spatial_only") return FusionMode::spatial_only;
  if (name == "motion_only") return FusionMode::motion_only;
  if (name == "concat_only" || name == "concat_fusion") return FusionMode::concat_only;
  EGOPOSE_CHECK(false, "unknown fusion mode: " + name);
  return FusionMode::full;
}

void PoseDecoderLayer::init(int64_t dim, int heads, int64_t ffn_hidden, std::mt19937_64& rng) {
  ln_self.init(dim);
  ln_cross.init(dim);
  ln_ffn.init(dim);
  self_attn.init(dim, heads, rng);
  cross_attn.init(dim, heads, rng);
  ffn.init(dim, ffn_hidden, rng);
}

nn::Var PoseDecoderLayer::forward(const nn::Var& q, const nn::Var& memory) const {
  Tensor no_mask;
  nn::Var h = q;
  nn::Var n = ln_self.forward(h);
  h = ag::add(h, self_attn.forward(n, n, no_mask));
  h = ag::add(h, cross_attn.forward(ln_cross.forward(h), memory, no_mask));
  return ag::add(h, ffn.forward(ln_ffn.forward(h)));
}

void PoseDecoderLayer::collect(const std::string& prefix, nn::ParamCollector& out) {
  ln_self.collect(prefix + ".ln_self", out);
  ln_cross.collect(prefix + ".ln_cross", out);
  ln_ffn.collect(prefix + ".ln_ffn", out);
  self_attn.collect(prefix + ".self", out);
  cross_attn.collect(prefix + ".cross", out);
  ffn.collect(prefix + ".ffn", out);
}

void PoseDecoderLayer::set_trainable(bool t) {
  ln_self.set_trainable(t);
  ln_cross.set_trainable(t);
  ln_ffn.set_trainable(t);
  self_attn.set_trainable(t);
  cross_attn.set_trainable(t);
  ffn.set_trainable(t);
}

void PoseDecoder::init(const PoseDecoderConfig& config, std::mt19937_64& rng) {
  EGOPOSE_CHECK(config.num_joints > 0 && config.token_dim > 0, "pose decoder: bad config");
  cfg = config;
  const int64_t d = cfg.token_dim;

  if (cfg.fusion != FusionMode::spatial_only) {
    motion_proj.init(cfg.motion_dim, d, rng);
  }
  int64_t fuse_in = 0;
  switch (cfg.fusion) {
    case FusionMode::full:
    case FusionMode::concat_only: fuse_in = 2 * d; break;
    case FusionMode::spatial_only:
    case FusionMode::motion_only: fuse_in = d; break;
  }
  fuse_proj.init(fuse_in, d, rng);

  {
    std::uniform_real_distribution<float> dist(-1.0f / std::sqrt(static_cast<float>(d)),
                                               1.0f / std::sqrt(static_cast<float>(d)));
    Tensor q({cfg.num_joints, d});
    for (int64_t i = 0; i < q.numel(); ++i) q.data()[i] = dist(rng);
    joint_queries.init(std::move(q));
  }

  layers.clear();
  if (cfg.fusion != FusionMode::concat_only) {
    layers.resize(cfg.num_layers);
    for (auto& layer : layers) {
      layer.init(d, cfg.num_heads, d * cfg.ffn_multiplier, rng);
    }
  }
  head1.init(d, d, rng);
  head2.init(d, d, rng);
  head3.init(d, 3, rng);
  // keep initial poses near the origin: the output scale amplifies to mm
  kernels::scale(head3.weight.var.val().numel(), 0.05f, head3.weight.var.val().data());
}

nn::Var PoseDecoder::fuse_memory(const nn::Var& spatial_tokens, const nn::Var& motion) const {
  const int64_t d = cfg.token_dim;
  const int64_t j = cfg.num_joints;

  nn::Var motion_tiled;
  if (cfg.fusion != FusionMode::spatial_only) {
    EGOPOSE_CHECK(motion.defined(), "fuse_memory: motion features required");
    const Shape& ms = motion.shape();
    EGOPOSE_CHECK(ms.size() == 3 && ms[2] == cfg.motion_dim, "fuse_memory: motion must be (B,T,dm)");
    nn::Var m = motion_proj.forward(motion);       // (B,T,d)
    motion_tiled = ag::tile_newaxis(m, 2, j);      // (B,T,J,d), identical rows per t
  }

  nn::Var fused_in;
  if (cfg.fusion == FusionMode::motion_only) {
    fused_in = motion_tiled;
  } else {
    EGOPOSE_CHECK(spatial_tokens.defined(), "fuse_memory: spatial tokens required");
    const Shape& ss = spatial_tokens.shape();
    EGOPOSE_CHECK(ss.size() == 4 && ss[2] == j && ss[3] == d,
                  "fuse_memory: spatial tokens must be (B,T,J,d)");
    if (cfg.fusion == FusionMode::spatial_only) {
      fused_in = spatial_tokens;
    } else {
      EGOPOSE_CHECK(spatial_tokens.shape()[0] == motion.shape()[0] &&
                        spatial_tokens.shape()[1] == motion.shape()[1],
                    "fuse_memory: spatial/motion batch or length mismatch");
      fused_in = ag::concat_lastdim(spatial_tokens, motion_tiled);
    }
  }
  return ag::leaky_relu(fuse_proj.forward(fused_in), nn::kLeakySlope);
}

nn::Var PoseDecoder::decode(const nn::Var& memory) const {
  if (cfg.fusion == FusionMode::concat_only) return memory;

  const Shape& ms = memory.shape();
  EGOPOSE_CHECK(ms.size() == 4 && ms[2] == cfg.num_joints && ms[3] == cfg.token_dim,
                "decode: memory must be (B,T,J,d)");
  const int64_t b = ms[0], t = ms[1], j = ms[2], d = ms[3];

  // queries tiled across (B*T); decoding is independent per timestep
  nn::Var q = ag::tile_newaxis(joint_queries.var, 0, b * t);  // (B*T, J, d)
  nn::Var mem = ag::reshape(memory, {b * t, j, d});
  for (const auto& layer : layers) {
    q = layer.forward(q, mem);
  }
  return ag::reshape(q, {b, t, j, d});
}

nn::Var PoseDecoder::regress(const nn::Var& features, const nn::Ctx& ctx) const {
  static std::mt19937_64 fallback_rng(0);
  std::mt19937_64& rng = ctx.rng ? *ctx.rng : fallback_rng;
  nn::Var h = ag::leaky_relu(head1.forward(features), nn::kLeakySlope);
  h = ag::dropout(h, cfg.dropout, ctx.training, rng);
  h = ag::leaky_relu(head2.forward(h), nn::kLeakySlope);
  h = ag::dropout(h, cfg.dropout, ctx.training, rng);
  return ag::scale(head3.forward(h), cfg.output_scale);
}

nn::Var PoseDecoder::forward(const nn::Var& spatial_tokens, const nn::Var& motion,
                             const nn::Ctx& ctx) const {
  return regress(decode(fuse_memory(spatial_tokens, motion)), ctx);
}

void PoseDecoder::collect(const std::string& prefix, nn::ParamCollector& out) {
  if (cfg.fusion != FusionMode::spatial_only) motion_proj.collect(prefix + ".motion_proj", out);
  fuse_proj.collect(prefix + ".fuse", out);
  out.add(prefix + ".queries", joint_queries);
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
  head1.collect(prefix + ".head1", out);
  head2.collect(prefix + ".head2", out);
  head3.collect(prefix + ".head3", out);
}

void PoseDecoder::set_trainable(bool t) {
  if (cfg.fusion != FusionMode::spatial_only) motion_proj.set_trainable(t);
  fuse_proj.set_trainable(t);
  joint_queries.set_trainable(t);
  for (auto& layer : layers) layer.set_trainable(t);
  head1.set_trainable(t);
  head2.set_trainable(t);
  head3.set_trainable(t);
}

}  // namespace egopose
