#include "egopose/spatial_embedder.hpp"

#include "egopose/check.hpp"

namespace egopose {

void SpatialEmbedder::init(const SpatialEmbedderConfig& config, std::mt19937_64& rng) {
  EGOPOSE_CHECK(config.channels.size() == 3, "embedder: expects exactly three conv stages");
  cfg = config;
  convs.clear();
  int64_t prev = 1;
  for (int64_t ch : cfg.channels) {
    nn::Conv2d c;
    c.init(prev, ch, 3, 2, 1, rng);
    convs.push_back(std::move(c));
    prev = ch;
  }
  proj.init(prev, cfg.embed_dim, rng);
  norm.init(cfg.embed_dim);
}

nn::Var SpatialEmbedder::forward(const nn::Var& heatmaps) const {
  const Shape& hs = heatmaps.shape();
  EGOPOSE_CHECK(hs.size() == 5, "embedder: heatmaps must be (B,T,J,h,w)");
  const int64_t b = hs[0], t = hs[1], j = hs[2], h = hs[3], w = hs[4];
  EGOPOSE_CHECK(h >= 8 && w >= 8, "embedder: heatmap spatial size must be at least 8");

  nn::Var x = ag::reshape(heatmaps, {b * t * j, 1, h, w});
  for (const auto& conv : convs) {
    x = ag::leaky_relu(conv.forward(x), nn::kLeakySlope);
  }
  x = ag::global_avg_pool(x);  // (BTJ, C)
  x = proj.forward(x);
  if (cfg.layernorm) x = norm.forward(x);
  return ag::reshape(x, {b, t, j, cfg.embed_dim});
}

void SpatialEmbedder::collect(const std::string& prefix, nn::ParamCollector& out) {
  for (size_t i = 0; i < convs.size(); ++i) {
    convs[i].collect(prefix + ".conv" + std::to_string(i), out);
  }
  proj.collect(prefix + ".proj", out);
  if (cfg.layernorm) norm.collect(prefix + ".norm", out);
}

void SpatialEmbedder::set_trainable(bool t) {
  for (auto& c : convs) c.set_trainable(t);
  proj.set_trainable(t);
  norm.set_trainable(t);
}

}  // namespace egopose
