#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "egopose/spatial_embedder.hpp"
#include "test_util.hpp"

using namespace egopose;
using ag::Var;

namespace {

SpatialEmbedder make_embedder(int64_t dim = 32, bool layernorm = false) {
  std::mt19937_64 rng(5);
  SpatialEmbedderConfig cfg;
  cfg.embed_dim = dim;
  cfg.layernorm = layernorm;
  SpatialEmbedder e;
  e.init(cfg, rng);
  return e;
}

}  // namespace

TEST_CASE("token shape contract") {
  SpatialEmbedder emb = make_embedder(128);
  std::mt19937_64 rng(1);
  const Tensor maps = testutil::random_tensor({1, 2, 15, 64, 64}, rng, 0.0f, 1.0f);
  const Var tokens = emb.forward(Var(maps));
  CHECK(tokens.shape() == Shape{1, 2, 15, 128});
}

TEST_CASE("too-small heatmaps are rejected") {
  SpatialEmbedder emb = make_embedder();
  std::mt19937_64 rng(2);
  CHECK_THROWS_AS(emb.forward(Var(testutil::random_tensor({1, 1, 15, 4, 4}, rng))),
                  std::invalid_argument);
  CHECK_NOTHROW(emb.forward(Var(testutil::random_tensor({1, 1, 15, 8, 8}, rng))));
}

TEST_CASE("shared embedder: identical maps give identical tokens") {
  SpatialEmbedder emb = make_embedder();
  std::mt19937_64 rng(3);
  Tensor maps = testutil::random_tensor({1, 1, 4, 16, 16}, rng, 0.0f, 1.0f);
  // joint 3 copies joint 1's map
  std::copy(maps.data() + 1 * 256, maps.data() + 2 * 256, maps.data() + 3 * 256);
  const Var tokens = emb.forward(Var(maps));
  const float* t1 = tokens.val().data() + 1 * 32;
  const float* t3 = tokens.val().data() + 3 * 32;
  for (int64_t i = 0; i < 32; ++i) CHECK(t1[i] == t3[i]);
}

TEST_CASE("per-joint locality: zeroing map k changes only token k") {
  SpatialEmbedder emb = make_embedder();
  std::mt19937_64 rng(4);
  const int64_t j = 6, hw = 16;
  const Tensor maps = testutil::random_tensor({1, 2, j, hw, hw}, rng, 0.1f, 1.0f);
  const Var base = emb.forward(Var(maps));

  const int64_t k = 2, t_idx = 1;
  Tensor poked = maps;
  float* target_map = poked.data() + ((t_idx * j) + k) * hw * hw;
  std::fill(target_map, target_map + hw * hw, 0.0f);
  const Var poked_tokens = emb.forward(Var(poked));

  for (int64_t t = 0; t < 2; ++t) {
    for (int64_t jj = 0; jj < j; ++jj) {
      const float* a = base.val().data() + ((t * j) + jj) * 32;
      const float* b = poked_tokens.val().data() + ((t * j) + jj) * 32;
      double diff = 0.0;
      for (int64_t i = 0; i < 32; ++i) diff = std::max(diff, std::abs(double(a[i]) - b[i]));
      if (t == t_idx && jj == k) {
        CHECK(diff > 1e-6);  // the poked token moved
      } else {
        CHECK(diff == 0.0);  // everything else untouched
      }
    }
  }
}

TEST_CASE("permutation equivariance over the joint axis") {
  SpatialEmbedder emb = make_embedder();
  std::mt19937_64 rng(6);
  const int64_t j = 5, hw = 16, d = 32;
  const Tensor maps = testutil::random_tensor({1, 1, j, hw, hw}, rng, 0.0f, 1.0f);
  const Var tokens = emb.forward(Var(maps));

  std::vector<int64_t> perm(j);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  Tensor permuted({1, 1, j, hw, hw});
  for (int64_t i = 0; i < j; ++i) {
    std::copy(maps.data() + perm[i] * hw * hw, maps.data() + (perm[i] + 1) * hw * hw,
              permuted.data() + i * hw * hw);
  }
  const Var permuted_tokens = emb.forward(Var(permuted));
  for (int64_t i = 0; i < j; ++i) {
    const float* expect = tokens.val().data() + perm[i] * d;
    const float* got = permuted_tokens.val().data() + i * d;
    for (int64_t c = 0; c < d; ++c) CHECK(expect[c] == got[c]);
  }
}

TEST_CASE("optional layer norm flag changes the output") {
  std::mt19937_64 rng(7);
  const Tensor maps = testutil::random_tensor({1, 1, 3, 16, 16}, rng, 0.0f, 1.0f);
  SpatialEmbedder plain = make_embedder(32, false);
  SpatialEmbedder normed = make_embedder(32, true);  // same init seed, extra norm
  const Var a = plain.forward(Var(maps));
  const Var b = normed.forward(Var(maps));
  CHECK(testutil::max_abs_diff(a.val(), b.val()) > 1e-6);
}

TEST_CASE("gradients flow into the embedder parameters") {
  SpatialEmbedder emb = make_embedder();
  std::mt19937_64 rng(8);
  const Tensor maps = testutil::random_tensor({1, 1, 3, 16, 16}, rng, 0.0f, 1.0f);
  Var loss = ag::mean_all(emb.forward(Var(maps)));
  ag::backward(loss);
  CHECK(emb.proj.weight.var.has_grad());
  CHECK(emb.convs[0].weight.var.has_grad());
}
