#pragma once

#include <string>

#include "egopose/heatmap_net.hpp"
#include "egopose/motion_encoder.hpp"
#include "egopose/pose_decoder.hpp"
#include "egopose/spatial_embedder.hpp"

namespace egopose {

/// Configuration of the full dual-stream pose model. Library defaults follow
/// the full-scale dimensions; desk_scale() shrinks resolutions and widths
/// while keeping every structural ratio.
struct PoseModelConfig {
  HeatmapNetConfig heatmap;
  SpatialEmbedderConfig embedder;
  StaticBackboneConfig backbone;
  TemporalEncoderConfig temporal;
  PoseDecoderConfig decoder;
  FusionMode fusion = FusionMode::full;
  bool heatmap_frozen = true;  // stage-2 contract

  void validate() const;
  static PoseModelConfig desk_scale();
};

struct PoseModel {
  PoseModelConfig cfg;
  HeatmapNetwork heatmap;
  SpatialEmbedder embedder;
  MotionEncoder motion;
  PoseDecoder decoder;

  void init(const PoseModelConfig& config, std::mt19937_64& rng);

  bool uses_spatial() const { return cfg.fusion != FusionMode::motion_only; }
  bool uses_motion() const { return cfg.fusion != FusionMode::spatial_only; }

  /// frames (B,T,3,H,W) normalized, valid (B,T) -> poses (B,T,J,3) mm.
  nn::Var forward(const nn::Var& frames, const Tensor& valid, const nn::Ctx& ctx);

  void collect(nn::ParamCollector& out);
  void apply_freeze_policy();
};

}  // namespace egopose
