#include "egopose/pose_model.hpp"

#include "egopose/check.hpp"

namespace egopose {

void PoseModelConfig::validate() const {
  heatmap.validate();
  temporal.validate();
  EGOPOSE_CHECK(embedder.embed_dim == decoder.token_dim,
                "model config: embed_dim must equal the decoder token dim");
  EGOPOSE_CHECK(backbone.model_dim == temporal.model_dim,
                "model config: backbone/temporal dim mismatch");
  EGOPOSE_CHECK(decoder.motion_dim == temporal.model_dim,
                "model config: decoder motion dim mismatch");
  EGOPOSE_CHECK(decoder.num_joints == heatmap.num_joints,
                "model config: joint count mismatch");
}

PoseModelConfig PoseModelConfig::desk_scale() {
  PoseModelConfig c;
  c.heatmap = HeatmapNetConfig::desk_scale();
  c.embedder.embed_dim = 64;
  c.backbone.model_dim = 64;
  c.temporal.model_dim = 64;
  c.decoder.token_dim = 64;
  c.decoder.motion_dim = 64;
  c.validate();
  return c;
}

void PoseModel::init(const PoseModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  cfg = config;
  cfg.decoder.fusion = cfg.fusion;
  heatmap.init(cfg.heatmap, rng);
  embedder.init(cfg.embedder, rng);
  motion.init(cfg.backbone, cfg.temporal, rng);
  decoder.init(cfg.decoder, rng);
  apply_freeze_policy();
}

nn::Var PoseModel::forward(const nn::Var& frames, const Tensor& valid, const nn::Ctx& ctx) {
  const Shape& fs = frames.shape();
  EGOPOSE_CHECK(fs.size() == 5 && fs[2] == 3, "model: frames must be (B,T,3,H,W)");
  const int64_t b = fs[0], t = fs[1], h = fs[3], w = fs[4];
  EGOPOSE_CHECK(valid.numel() == b * t, "model: valid mask shape mismatch");

  nn::Var tokens;
  if (uses_spatial()) {
    nn::Var flat = ag::reshape(frames, {b * t, 3, h, w});
    nn::Var logits = heatmap.forward(flat);
    nn::Var maps = ag::sigmoid(logits);  // predicted heatmaps feed the embedder
    maps = ag::reshape(maps, {b, t, cfg.heatmap.num_joints, cfg.heatmap.heatmap_resolution,
                              cfg.heatmap.heatmap_resolution});
    tokens = embedder.forward(maps);
  }

  nn::Var motion_features;
  if (uses_motion()) {
    motion_features = motion.forward(frames, valid, ctx);
  }

  return decoder.forward(tokens, motion_features, ctx);
}

void PoseModel::collect(nn::ParamCollector& out) {
  if (uses_spatial()) {
    heatmap.collect("heatmap", out);
    embedder.collect("embedder", out);
  }
  if (uses_motion()) {
    motion.collect("motion", out);
  }
  decoder.collect("decoder", out);
}

void PoseModel::apply_freeze_policy() {
  if (cfg.heatmap_frozen) heatmap.set_trainable(false);
  motion.apply_freeze_policy();
}

}  // namespace egopose
