#include "egopose/heatmap_net.hpp"

#include "egopose/check.hpp"

namespace egopose {

void HeatmapNetConfig::validate() const {
  EGOPOSE_CHECK(input_resolution == heatmap_resolution * 4,
                "heatmap config: input resolution must be 4x the heatmap resolution");
  EGOPOSE_CHECK(!encoder_channels.empty(), "heatmap config: encoder channels empty");
  EGOPOSE_CHECK(num_joints > 0, "heatmap config: need at least one joint");
  EGOPOSE_CHECK(decoder_channels > 0, "heatmap config: decoder channels must be positive");
  EGOPOSE_CHECK(input_resolution % (1 << encoder_channels.size()) == 0,
                "heatmap config: input resolution must be divisible by the encoder stride");
}

HeatmapNetConfig HeatmapNetConfig::desk_scale() {
  HeatmapNetConfig c;
  c.input_resolution = 64;
  c.heatmap_resolution = 16;
  return c;
}

void HeatmapNetwork::init(const HeatmapNetConfig& config, std::mt19937_64& rng) {
  config.validate();
  cfg = config;
  downs.clear();
  blocks.clear();
  skips.clear();
  int64_t prev = 3;
  for (int64_t ch : cfg.encoder_channels) {
    nn::Conv2d down;
    down.init(prev, ch, 3, 2, 1, rng);
    downs.push_back(std::move(down));
    nn::ResidualConvBlock block;
    block.init(ch, rng);
    blocks.push_back(std::move(block));
    nn::Conv2d skip;
    skip.init(ch, cfg.decoder_channels, 1, 1, 0, rng);
    skips.push_back(std::move(skip));
    prev = ch;
  }
  fuse.init(cfg.decoder_channels, cfg.decoder_channels, 3, 1, 1, rng);
  head.init(cfg.decoder_channels, cfg.num_joints, 1, 1, 0, rng);
}

nn::Var HeatmapNetwork::forward(const nn::Var& frames) const {
  const Shape& fs = frames.shape();
  EGOPOSE_CHECK(fs.size() == 4 && fs[1] == 3, "heatmap forward: frames must be (N,3,H,W)");
  EGOPOSE_CHECK(fs[2] == cfg.input_resolution && fs[3] == cfg.input_resolution,
                "heatmap forward: frame size " + std::to_string(fs[2]) + " does not match config " +
                    std::to_string(cfg.input_resolution));

  nn::Var x = frames;
  nn::Var pyramid;
  for (size_t i = 0; i < downs.size(); ++i) {
    x = ag::leaky_relu(downs[i].forward(x), nn::kLeakySlope);
    x = blocks[i].forward(x);
    nn::Var skip = skips[i].forward(x);
    skip = ag::bilinear_resize(skip, cfg.heatmap_resolution, cfg.heatmap_resolution);
    pyramid = pyramid.defined() ? ag::add(pyramid, skip) : skip;
  }
  nn::Var fused = ag::leaky_relu(fuse.forward(pyramid), nn::kLeakySlope);
  return head.forward(fused);
}

void HeatmapNetwork::collect(const std::string& prefix, nn::ParamCollector& out) {
  for (size_t i = 0; i < downs.size(); ++i) {
    const std::string stage = prefix + ".s" + std::to_string(i);
    downs[i].collect(stage + ".down", out);
    blocks[i].collect(stage + ".res", out);
    skips[i].collect(stage + ".skip", out);
  }
  fuse.collect(prefix + ".fuse", out);
  head.collect(prefix + ".head", out);
}

void HeatmapNetwork::set_trainable(bool t) {
  for (auto& d : downs) d.set_trainable(t);
  for (auto& b : blocks) b.set_trainable(t);
  for (auto& s : skips) s.set_trainable(t);
  fuse.set_trainable(t);
  head.set_trainable(t);
}

}  // namespace egopose
