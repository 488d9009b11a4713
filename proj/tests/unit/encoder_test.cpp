#include <gtest/gtest.h>

#include <algorithm>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/encoder/vit.hpp"
#include "vitnerf/tensor/grad_check.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::encoder {
namespace {

using TD = Tensor<double>;

TD random_image(std::size_t h, std::size_t w, Rng& rng) {
  std::vector<double> v(3 * h * w);
  for (auto& x : v) x = rng.uniform();
  return TD({3, h, w}, std::move(v));
}

void fill(ParameterStore<double>& store, const std::string& name, double value) {
  Tensor<double> t = store.get(name);
  std::fill(t.mutable_data().begin(), t.mutable_data().end(), value);
}

ViTConfig small_config() {
  ViTConfig cfg;
  cfg.patch_size = 4;
  cfg.depth = 3;
  cfg.latent_dim = 8;
  cfg.heads = 2;
  cfg.mlp_ratio = 2.0;
  cfg.pos_grid_rows = 2;
  cfg.pos_grid_cols = 2;
  return cfg;
}

TEST(ViTConfig, DefaultTaps) {
  EXPECT_EQ(default_taps(12), (std::vector<int>{3, 6, 9, 12}));
  EXPECT_EQ(default_taps(4), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(default_taps(2), (std::vector<int>{1, 2}));
}

TEST(ViTConfig, Validation) {
  auto cfg = small_config();
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = small_config();
  cfg.tap_layers = {2, 1};
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg.tap_layers = {1, 4};
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(Patchify, TokenCounts) {
  Rng rng(1);
  const auto p64 = patchify(TD::zeros({3, 64, 64}), 16);
  EXPECT_EQ(p64.shape(), (Shape{16, 768}));
  const auto p128 = patchify(TD::zeros({3, 128, 128}), 16);
  EXPECT_EQ(p128.shape(), (Shape{64, 768}));
  EXPECT_THROW(patchify(TD::zeros({3, 60, 64}), 16), ShapeError);
}

TEST(Patchify, RoundTripIsExact) {
  Rng rng(2);
  const TD img = random_image(24, 16, rng);
  const TD back = unpatchify(patchify(img, 8), 8, 24, 16);
  EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), back.data().begin()));
}

TEST(Patchify, Layout) {
  Rng rng(3);
  const TD img = random_image(8, 8, rng);
  const TD p = patchify(img, 4);
  // Patch 1 is the top-right block; element (py, px, c) sits at (py*4 + px)*3 + c.
  EXPECT_EQ(p[1 * 48 + (2 * 4 + 3) * 3 + 1], img[(1 * 8 + 2) * 8 + 4 + 3]);
}

TEST(Embed, ZeroPositionsGivePureProjection) {
  Rng rng(4);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  fill(store, "vit.pos_embed", 0.0);
  fill(store, "vit.bg_token", 0.0);
  const TD patches = patchify(random_image(8, 8, rng), 4);
  const auto seq = embed(patches, Grid{2, 2}, store, cfg);
  ASSERT_EQ(seq.tokens.shape(), (Shape{5, 8}));
  const TD proj = linear(patches, store.get("vit.patch_proj.weight"), store.get("vit.patch_proj.bias"));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(seq.tokens[i], 0.0);
  for (std::size_t i = 0; i < proj.numel(); ++i) EXPECT_EQ(seq.tokens[8 + i], proj[i]);
}

TEST(Embed, MatchingGridUsesStoredPositions) {
  Rng rng(5);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  fill(store, "vit.patch_proj.weight", 0.0);
  const auto seq = embed(patchify(random_image(8, 8, rng), 4), Grid{2, 2}, store, cfg);
  const TD& pos = store.get("vit.pos_embed");
  const TD& bg = store.get("vit.bg_token");
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(seq.tokens[i], bg[i] + pos[i]);
  for (std::size_t i = 8; i < 40; ++i) EXPECT_EQ(seq.tokens[i], pos[i]);
}

TEST(Embed, ConstantPositionsSurviveResize) {
  Rng rng(6);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  fill(store, "vit.patch_proj.weight", 0.0);
  fill(store, "vit.pos_embed", 0.25);
  const auto seq = embed(patchify(random_image(16, 12, rng), 4), Grid{4, 3}, store, cfg);
  ASSERT_EQ(seq.tokens.shape(), (Shape{13, 8}));
  for (std::size_t i = 8; i < seq.tokens.numel(); ++i) EXPECT_NEAR(seq.tokens[i], 0.25, 1e-15);
}

TEST(TransformerLayer, SingleTokenReducesToResidualPaths) {
  Rng rng(7);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  std::vector<double> v(8);
  for (auto& x : v) x = rng.uniform(-1, 1);
  const TD x({1, 8}, v);
  AttentionTrace<double> trace;
  const TD out = transformer_layer(x, store, 1, cfg, &trace);
  ASSERT_EQ(trace.heads.size(), 2u);
  for (const auto& a : trace.heads) EXPECT_EQ(a[0], 1.0);

  auto lin = [&](const TD& in, const std::string& n) {
    return linear(in, store.get(n + ".weight"), store.get(n + ".bias"));
  };
  auto ln = [&](const TD& in, const std::string& n) {
    return layernorm(in, store.get(n + ".gain"), store.get(n + ".bias"), cfg.layernorm_eps);
  };
  const TD y = add(x, lin(lin(ln(x, "vit.layer1.ln1"), "vit.layer1.msa.v_proj"), "vit.layer1.msa.out_proj"));
  const TD want = add(y, lin(gelu(lin(ln(y, "vit.layer1.ln2"), "vit.layer1.mlp.fc1")), "vit.layer1.mlp.fc2"));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(out[i], want[i], 1e-14);
}

TEST(TransformerLayer, ImageTokensArePermutationEquivariant) {
  Rng rng(8);
  auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  std::vector<double> v(5 * 8);
  for (auto& x : v) x = rng.uniform(-1, 1);
  const TD x({5, 8}, v);
  const std::vector<std::size_t> perm{0, 3, 1, 4, 2};
  std::vector<double> pv(v.size());
  for (std::size_t r = 0; r < 5; ++r)
    std::copy_n(v.begin() + perm[r] * 8, 8, pv.begin() + r * 8);
  const TD px({5, 8}, pv);
  TD y = x, py = px;
  for (int l = 1; l <= cfg.depth; ++l) {
    y = transformer_layer(y, store, l, cfg);
    py = transformer_layer(py, store, l, cfg);
  }
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(py[r * 8 + c], y[perm[r] * 8 + c], 1e-12);
}

TEST(TransformerLayer, AttentionRowsAreStochastic) {
  Rng rng(9);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  const auto seq = embed(patchify(random_image(12, 12, rng), 4), Grid{3, 3}, store, cfg);
  AttentionTrace<double> trace;
  transformer_layer(seq.tokens, store, 1, cfg, &trace);
  for (const auto& a : trace.heads) {
    ASSERT_EQ(a.shape(), (Shape{10, 10}));
    for (std::size_t r = 0; r < 10; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 10; ++c) s += a[r * 10 + c];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Encode, SingleTapEqualsFullForward) {
  Rng rng(10);
  auto cfg = small_config();
  cfg.tap_layers = {3};
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  const TD img = random_image(8, 8, rng);
  const auto out = encode(img, store, cfg);
  ASSERT_EQ(out.taps.size(), 1u);
  TD t = embed(patchify(img, 4), Grid{2, 2}, store, cfg).tokens;
  for (int l = 1; l <= 3; ++l) t = transformer_layer(t, store, l, cfg);
  const TD& tap = out.taps.at(3);
  EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), tap.data().begin()));
}

TEST(Encode, DefaultTapsAndShapes) {
  Rng rng(11);
  ViTConfig cfg;
  cfg.patch_size = 4;
  cfg.depth = 12;
  cfg.latent_dim = 8;
  cfg.heads = 2;
  cfg.mlp_ratio = 1.0;
  cfg.pos_grid_rows = cfg.pos_grid_cols = 2;
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  const auto out = encode(random_image(8, 12, rng), store, cfg);
  std::vector<int> keys;
  for (const auto& [k, t] : out.taps) {
    keys.push_back(k);
    EXPECT_EQ(t.shape(), (Shape{7, 8}));
  }
  EXPECT_EQ(keys, (std::vector<int>{3, 6, 9, 12}));
}

TEST(Encode, Deterministic) {
  Rng rng(12);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  const TD img = random_image(8, 8, rng);
  const auto a = encode(img, store, cfg), b = encode(img, store, cfg);
  for (const auto& [k, t] : a.taps)
    EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), b.taps.at(k).data().begin()));
}

TEST(Encode, PatchProjectionGradient) {
  Rng rng(13);
  const auto cfg = small_config();
  ParameterStore<double> store;
  init_vit(store, cfg, rng);
  const TD img = random_image(8, 8, rng);
  std::vector<double> wv(5 * 8);
  for (auto& x : wv) x = rng.uniform(-1, 1);
  const TD w({5, 8}, wv);
  GradCheckOptions opt;
  opt.step = 1e-6;
  opt.tolerance = 1e-4;
  const auto report = grad_check<double>(
      [&] { return sum(mul(encode(img, store, cfg).taps.at(3), w)); },
      store.with_prefix("vit.patch_proj"), opt);
  EXPECT_TRUE(report.passed) << report.worst_name << " " << report.error;
}

}  // namespace
}  // namespace vitnerf::encoder
