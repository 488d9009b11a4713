#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "vitnerf/core/config.hpp"
#include "vitnerf/core/errors.hpp"
#include "vitnerf/model/model.hpp"

namespace vitnerf::model {
namespace {

TEST(ModelConfig, Presets) {
  const auto toy = toy_model_config();
  EXPECT_EQ(toy.vit.latent_dim, 64);
  EXPECT_EQ(toy.vit.depth, 4);
  EXPECT_EQ(toy.vit.patch_size, 8);
  EXPECT_EQ(toy.vit.taps(), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(toy.hybrid_channels(), 48);
  EXPECT_EQ(toy.n_coarse, 16);
  EXPECT_EQ(toy.n_fine, 32);

  const auto full = full_model_config();
  EXPECT_EQ(full.vit.latent_dim, 768);
  EXPECT_EQ(full.vit.depth, 12);
  EXPECT_EQ(full.vit.patch_size, 16);
  EXPECT_EQ(full.vit.taps(), (std::vector<int>{3, 6, 9, 12}));
  EXPECT_EQ(full.hybrid_channels(), 512);
  EXPECT_EQ(full.mlp.width, 512);
  EXPECT_EQ(full.mlp.blocks, 6);
  EXPECT_EQ(full.n_coarse, 64);
  EXPECT_EQ(full.n_fine, 128);

  EXPECT_NO_THROW(tiny_model_config().validate());
}

TEST(ModelConfig, ReadsOverrides) {
  const auto kv = KeyValueConfig::parse("preset = tiny\nmlp.width = 12\nfeatures.use_local = false\n");
  const auto c = model_config_from(kv);
  EXPECT_EQ(c.mlp.width, 12);
  EXPECT_FALSE(c.features.use_local);
  EXPECT_EQ(c.vit.latent_dim, 16);
  EXPECT_THROW(model_config_from(KeyValueConfig::parse("preset = huge\n")), ArgumentError);
  EXPECT_THROW(model_config_from(KeyValueConfig::parse("vit.heads = 5\n")), ArgumentError);
}

TEST(ModelConfig, EntriesRoundTrip) {
  auto c = toy_model_config();
  c.features.use_local = false;
  c.n_fine = 24;
  KeyValueConfig kv;
  for (const auto& [k, v] : model_config_entries(c)) kv.set(k, v);
  kv.require_known(model_config_keys());
  const auto back = model_config_from(kv);
  EXPECT_EQ(model_config_entries(back), model_config_entries(c));
}

TEST(ModelParameters, GroupsAndModules) {
  EXPECT_EQ(lr_group("coarse.linear_in.weight"), "mlp");
  EXPECT_EQ(lr_group("fine.out.bias"), "mlp");
  EXPECT_EQ(lr_group("vit.layer0.attn.wq"), "encoder");
  EXPECT_EQ(lr_group("local.stem.weight"), "encoder");
  EXPECT_EQ(module_of("decoder.level2.conv.weight"), "decoder");

  Model<float> m(tiny_model_config(), 3);
  const std::set<std::string> allowed = {"vit", "decoder", "fuse", "local", "coarse", "fine"};
  std::set<std::string> seen;
  for (const auto& [name, t] : m.params().all()) {
    EXPECT_TRUE(allowed.count(module_of(name))) << name;
    seen.insert(module_of(name));
  }
  EXPECT_EQ(seen, allowed);
}

TEST(ModelParameters, SeedDeterminesInitialization) {
  Model<float> a(tiny_model_config(), 5), b(tiny_model_config(), 5), c(tiny_model_config(), 6);
  bool differs = false;
  for (const auto& [name, t] : a.params().all()) {
    const auto x = t.data(), y = b.params().get(name).data(), z = c.params().get(name).data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end())) << name;
    differs |= !std::equal(x.begin(), x.end(), z.begin(), z.end());
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace vitnerf::model
