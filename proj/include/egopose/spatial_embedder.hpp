#pragma once

#include "egopose/nn.hpp"

namespace egopose {

/// Shared per-joint heatmap embedder: three stride-2 convolutions, adaptive
/// average pooling to 1x1, then a linear map to embed_dim. One instance is
/// shared across all joints and timesteps, so token j depends only on map j.
struct SpatialEmbedderConfig {
  int64_t embed_dim = 128;
  std::vector<int64_t> channels = {16, 32, 64};
  bool layernorm = false;  // optional output normalization, off by default
};

struct SpatialEmbedder {
  SpatialEmbedderConfig cfg;
  std::vector<nn::Conv2d> convs;
  nn::Linear proj;
  nn::LayerNorm norm;

  void init(const SpatialEmbedderConfig& config, std::mt19937_64& rng);
  /// heatmaps (B,T,J,h,w) in [0,1] -> tokens (B,T,J,embed_dim). Requires
  /// h,w >= 8 so three downsamplings stay non-empty.
  nn::Var forward(const nn::Var& heatmaps) const;
  void collect(const std::string& prefix, nn::ParamCollector& out);
  void set_trainable(bool t);
};

}  // namespace egopose
