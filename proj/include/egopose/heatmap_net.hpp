#pragma once

#include <vector>

#include "egopose/nn.hpp"

namespace egopose {

/// Convolutional encoder-decoder that maps RGB frames to per-joint heatmap
/// logits. Four stride-2 residual stages; every stage is projected to a common
/// width, resized to the heatmap resolution and summed before the prediction
/// head (unified skip fusion). The backbone is shared across joints; only the
/// head has J output channels.
struct HeatmapNetConfig {
  int input_resolution = 256;
  int heatmap_resolution = 64;
  int num_joints = 15;
  std::vector<int64_t> encoder_channels = {16, 32, 64, 128};
  int64_t decoder_channels = 32;

  void validate() const;
  static HeatmapNetConfig desk_scale();
};

struct HeatmapNetwork {
  HeatmapNetConfig cfg;
  std::vector<nn::Conv2d> downs;             // stride-2 stage entries
  std::vector<nn::ResidualConvBlock> blocks; // one per stage
  std::vector<nn::Conv2d> skips;             // 1x1 projections to decoder width
  nn::Conv2d fuse;                           // 3x3 on the summed pyramid
  nn::Conv2d head;                           // 1x1 to J channels

  void init(const HeatmapNetConfig& config, std::mt19937_64& rng);
  /// frames (N,3,H,W) normalized, H = W = cfg.input_resolution ->
  /// logits (N,J,hm,hm).
  nn::Var forward(const nn::Var& frames) const;
  void collect(const std::string& prefix, nn::ParamCollector& out);
  void set_trainable(bool t);
};

}  // namespace egopose
