#pragma once

#include "egopose/nn.hpp"

namespace egopose {

enum class FusionMode {
  full,          // spatial tokens + tiled motion, cross-attention decoder
  spatial_only,  // memory from spatial tokens alone
  motion_only,   // memory from tiled motion alone
  concat_only,   // fused memory, but the pose head reads it directly
};

const char* fusion_mode_name(FusionMode m);
FusionMode fusion_mode_from_name(const std::string& name);

struct PoseDecoderConfig {
  int num_joints = 15;
  int64_t token_dim = 128;    // spatial token width, also the decoder width d
  int64_t motion_dim = 384;   // incoming motion feature width
  int num_layers = 3;
  int num_heads = 4;
  int ffn_multiplier = 4;
  float dropout = 0.1f;
  float output_scale = 1000.0f;  // head works near unit scale, poses are mm
  FusionMode fusion = FusionMode::full;
};

/// Decoder layer: joint queries self-attend, cross-attend over the per-frame
/// memory rows, then a feed-forward. Pre-norm residual wiring; no positional
/// encodings anywhere, so cross-attention is set-invariant over memory rows.
struct PoseDecoderLayer {
  nn::LayerNorm ln_self, ln_cross, ln_ffn;
  nn::MultiHeadAttention self_attn, cross_attn;
  nn::FeedForward ffn;

  void init(int64_t dim, int heads, int64_t ffn_hidden, std::mt19937_64& rng);
  nn::Var forward(const nn::Var& q, const nn::Var& memory) const;
  void collect(const std::string& prefix, nn::ParamCollector& out);
  void set_trainable(bool t);
};

struct PoseDecoder {
  PoseDecoderConfig cfg;
  nn::Linear motion_proj;   // motion_dim -> d (absent in spatial_only)
  nn::Linear fuse_proj;     // W_c: concat width -> d
  nn::Param joint_queries;  // (J, d)
  std::vector<PoseDecoderLayer> layers;
  nn::Linear head1, head2, head3;  // shared MLP head d -> d -> d -> 3

  void init(const PoseDecoderConfig& config, std::mt19937_64& rng);

  /// Builds the joint-conditioned memory from spatial tokens (B,T,J,d) and
  /// motion features (B,T,motion_dim); either input may be undefined in the
  /// single-stream ablations.
  nn::Var fuse_memory(const nn::Var& spatial_tokens, const nn::Var& motion) const;

  /// Decodes memory (B,T,J,d) through the query decoder -> features (B,T,J,d).
  /// In concat_only mode the memory passes through unchanged.
  nn::Var decode(const nn::Var& memory) const;

  /// Shared regression head -> (B,T,J,3) millimeters.
  nn::Var regress(const nn::Var& features, const nn::Ctx& ctx) const;

  nn::Var forward(const nn::Var& spatial_tokens, const nn::Var& motion, const nn::Ctx& ctx) const;

  void collect(const std::string& prefix, nn::ParamCollector& out);
  void set_trainable(bool t);
};

}  // namespace egopose
