#pragma once

#include "egopose/nn.hpp"

namespace egopose {

/// Per-frame appearance backbone: small conv stages with global average
/// pooling, then linear projection + batch norm to model_dim. Mirrors the
/// frozen-pretrained setup by training only the final stage by default.
struct StaticBackboneConfig {
  std::vector<int64_t> channels = {8, 16, 32};
  int64_t model_dim = 384;
  bool train_last_stage_only = true;
};

struct StaticBackbone {
  StaticBackboneConfig cfg;
  std::vector<nn::Conv2d> stages;
  nn::Linear proj;
  nn::BatchNorm1d bn;

  void init(const StaticBackboneConfig& config, std::mt19937_64& rng);
  /// frames (B,T,3,H,W) -> features (B,T,model_dim)
  nn::Var forward(const nn::Var& frames, const nn::Ctx& ctx);
  void collect(const std::string& prefix, nn::ParamCollector& out);
  void apply_freeze_policy();  // honors train_last_stage_only
  void set_trainable(bool t);
};

/// Local-to-global temporal stack: the first num_local_blocks blocks restrict
/// attention to a +-window_w frame band, the rest attend over the full
/// sequence. Invalid positions neither attend nor are attended to, and the
/// output rows at invalid positions are zeroed.
struct TemporalEncoderConfig {
  int num_blocks = 8;
  int num_local_blocks = 4;
  int window_w = 8;
  int64_t model_dim = 384;
  int num_heads = 4;
  int ffn_multiplier = 4;
  bool frozen = false;
  bool literal_block = false;  // bare attention + feed-forward composition, no identity residual

  void validate() const;
};

struct TemporalEncoder {
  TemporalEncoderConfig cfg;
  std::vector<nn::TransformerBlock> blocks;

  void init(const TemporalEncoderConfig& config, std::mt19937_64& rng);
  /// x (B,T,d), valid (B,T) 0/1 -> (B,T,d), zeroed at invalid rows.
  nn::Var forward(const nn::Var& x, const Tensor& valid) const;
  /// Runs only blocks [first, last) -- test hook for receptive-field checks.
  nn::Var forward_range(const nn::Var& x, const Tensor& valid, int first, int last,
                        std::vector<Tensor>* attn_out = nullptr) const;
  void collect(const std::string& prefix, nn::ParamCollector& out);
  void set_trainable(bool t);
  void apply_freeze_policy() { if (cfg.frozen) set_trainable(false); }
};

/// Attention validity band: mask[b,i,j] = valid[b,i] && valid[b,j] &&
/// (window < 0 || |i-j| <= window).
Tensor build_attention_mask(const Tensor& valid, int window);

struct MotionEncoder {
  StaticBackbone backbone;
  TemporalEncoder temporal;

  void init(const StaticBackboneConfig& bcfg, const TemporalEncoderConfig& tcfg,
            std::mt19937_64& rng);
  nn::Var forward(const nn::Var& frames, const Tensor& valid, const nn::Ctx& ctx);
  void collect(const std::string& prefix, nn::ParamCollector& out);
  void apply_freeze_policy();
};

}  // namespace egopose
