#include "vitnerf/features/features.hpp"

#include <cmath>
#include <string>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::features {
namespace {

std::string level_prefix(int layer) { return "decoder.level" + std::to_string(layer) + "."; }

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

template <typename T>
void add_conv(ParameterStore<T>& store, const std::string& name, int in, int out, int k,
              bool bias, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  store.add(name + ".weight", uniform_tensor<T>({sz(out), sz(in), sz(k), sz(k)}, bound, rng));
  if (bias) store.add(name + ".bias", uniform_tensor<T>({sz(out)}, bound, rng));
}

template <typename T>
void add_transposed_conv(ParameterStore<T>& store, const std::string& name, int in, int out,
                         int k, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(out * k * k));
  store.add(name + ".weight", uniform_tensor<T>({sz(in), sz(out), sz(k), sz(k)}, bound, rng));
  store.add(name + ".bias", uniform_tensor<T>({sz(out)}, bound, rng));
}

template <typename T>
void add_batchnorm(ParameterStore<T>& store, const std::string& name, int channels) {
  store.add(name + ".gamma", Tensor<T>::full({sz(channels)}, T(1)));
  store.add(name + ".beta", Tensor<T>::zeros({sz(channels)}));
  auto& stats = store.batchnorm(name);
  stats.running_mean.assign(sz(channels), T(0));
  stats.running_var.assign(sz(channels), T(1));
}

template <typename T>
Tensor<T> apply_conv(const Tensor<T>& x, const ParameterStore<T>& store, const std::string& name,
                     std::size_t stride = 1) {
  const std::string b = name + ".bias";
  return conv2d(x, store.get(name + ".weight"), store.contains(b) ? store.get(b) : Tensor<T>(),
                stride);
}

template <typename T>
Tensor<T> apply_batchnorm(const Tensor<T>& x, ParameterStore<T>& store, const std::string& name,
                          const FeatureConfig& cfg, bool training) {
  return batchnorm2d(x, store.get(name + ".gamma"), store.get(name + ".beta"),
                     store.batchnorm(name), training, static_cast<T>(cfg.bn_momentum),
                     static_cast<T>(cfg.bn_eps));
}

}  // namespace

std::vector<int> FeatureConfig::level_widths(int latent_dim, std::size_t levels) const {
  if (!level_channels.empty()) return level_channels;
  std::vector<int> w;
  for (std::size_t r = 0; r < levels; ++r) w.push_back(std::max(1, latent_dim >> (3 - r)));
  return w;
}

void FeatureConfig::validate(int latent_dim, std::size_t levels) const {
  if (levels == 0 || levels > 4)
    throw ArgumentError("feature decoder supports 1 to 4 levels, got " + std::to_string(levels));
  const auto w = level_widths(latent_dim, levels);
  if (w.size() < levels)
    throw ArgumentError("feature level widths list has " + std::to_string(w.size()) +
                        " entries for " + std::to_string(levels) + " taps");
  for (int c : w)
    if (c < 1) throw ArgumentError("feature level widths must be positive");
  if (level_out < 1 || fuse_mid < 1 || global_dim < 1 || local_dim < 1 || local_blocks < 0)
    throw ArgumentError("feature channel counts must be positive");
  if (!(bn_eps > 0.0) || bn_momentum < 0.0 || bn_momentum > 1.0)
    throw ArgumentError("batch-norm eps must be positive and momentum in [0, 1]");
}

double level_scale(std::size_t rank) {
  static constexpr double kScales[] = {4.0, 2.0, 1.0, 0.5};
  if (rank >= 4) throw ArgumentError("decoder level rank " + std::to_string(rank) + " not in 0..3");
  return kScales[rank];
}

template <typename T>
Tensor<T> reassemble(const Tensor<T>& tokens, encoder::Grid grid) {
  if (tokens.rank() != 2 || tokens.size(0) != sz(grid.count()) + 1)
    throw ShapeError("reassemble: " + shape_str(tokens.shape()) + " tokens for a " +
                     std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                     " grid plus background token");
  const std::size_t d = tokens.size(1), n = sz(grid.count());
  std::vector<std::size_t> index(d * n);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t i = 0; i < n; ++i) index[c * n + i] = (1 + i) * d + c;
  return gather(tokens, {d, sz(grid.rows), sz(grid.cols)}, std::move(index));
}

template <typename T>
void init_features(ParameterStore<T>& store, const encoder::ViTConfig& vit,
                   const FeatureConfig& cfg, Rng& rng) {
  const auto taps = vit.taps();
  cfg.validate(vit.latent_dim, taps.size());
  const auto widths = cfg.level_widths(vit.latent_dim, taps.size());
  for (std::size_t r = 0; r < taps.size(); ++r) {
    const std::string pre = level_prefix(taps[r]);
    const int c = widths[r];
    add_conv(store, pre + "conv0", vit.latent_dim, c, 1, true, rng);
    if (r == 0) add_transposed_conv(store, pre + "up", c, c, 4, rng);
    if (r == 1) add_transposed_conv(store, pre + "up", c, c, 2, rng);
    if (r == 3) add_conv(store, pre + "down", c, c, 3, true, rng);
    add_conv(store, pre + "conv_out", c, cfg.level_out, 3, true, rng);
  }
  add_conv(store, "fuse.conv0", cfg.level_out * static_cast<int>(taps.size()), cfg.fuse_mid, 3,
           true, rng);
  add_conv(store, "fuse.conv1", cfg.fuse_mid, cfg.global_dim, 3, true, rng);

  add_conv(store, "local.stem", 3, cfg.local_dim, 3, true, rng);
  for (int b = 0; b < cfg.local_blocks; ++b) {
    const std::string pre = "local.block" + std::to_string(b) + ".";
    add_conv(store, pre + "conv0", cfg.local_dim, cfg.local_dim, 3, false, rng);
    add_batchnorm(store, pre + "bn0", cfg.local_dim);
    add_conv(store, pre + "conv1", cfg.local_dim, cfg.local_dim, 3, false, rng);
    add_batchnorm(store, pre + "bn1", cfg.local_dim);
  }
}

template <typename T>
Tensor<T> decode_level(const Tensor<T>& map, int layer, std::size_t rank,
                       const ParameterStore<T>& store) {
  const std::string pre = level_prefix(layer);
  if (!store.contains(pre + "conv0.weight"))
    throw ArgumentError("decode_level: no decoder branch for layer " + std::to_string(layer));
  if (rank >= 4) throw ArgumentError("decode_level: rank " + std::to_string(rank) + " not in 0..3");
  Tensor<T> x = apply_conv(map, store, pre + "conv0");
  if (rank == 0 || rank == 1) {
    x = transposed_conv2d(x, store.get(pre + "up.weight"), store.get(pre + "up.bias"),
                          rank == 0 ? 4 : 2);
  } else if (rank == 3) {
    x = apply_conv(x, store, pre + "down", 2);
  }
  return apply_conv(x, store, pre + "conv_out");
}

template <typename T>
Tensor<T> fuse_global(const std::map<int, Tensor<T>>& levels, std::size_t out_h,
                      std::size_t out_w, const ParameterStore<T>& store) {
  if (levels.empty()) throw ArgumentError("fuse_global: no feature levels");
  std::vector<Tensor<T>> resized;
  for (const auto& [layer, m] : levels) resized.push_back(bilinear_resize(m, out_h, out_w));
  Tensor<T> x = resized.size() == 1 ? resized[0] : concat_rows(resized);
  x = relu(apply_conv(x, store, "fuse.conv0"));
  return relu(apply_conv(x, store, "fuse.conv1"));
}

template <typename T>
Tensor<T> local_features(const Tensor<T>& image, ParameterStore<T>& store,
                         const FeatureConfig& cfg, bool training) {
  if (image.rank() != 3 || image.size(1) % 2 != 0 || image.size(2) % 2 != 0)
    throw ShapeError("local_features: expected [C x H x W] with even H and W, got " +
                     shape_str(image.shape()));
  Tensor<T> x = apply_conv(image, store, "local.stem", 2);
  for (int b = 0; b < cfg.local_blocks; ++b) {
    const std::string pre = "local.block" + std::to_string(b) + ".";
    Tensor<T> y = apply_conv(x, store, pre + "conv0");
    y = relu(apply_batchnorm(y, store, pre + "bn0", cfg, training));
    y = apply_conv(y, store, pre + "conv1");
    y = apply_batchnorm(y, store, pre + "bn1", cfg, training);
    x = relu(add(x, y));
  }
  return x;
}

template <typename T>
Tensor<T> fuse_hybrid(const Tensor<T>& fused_global, const Tensor<T>& local) {
  if (fused_global.rank() != 3 || local.rank() != 3 || fused_global.size(1) != local.size(1) ||
      fused_global.size(2) != local.size(2))
    throw ShapeError("fuse_hybrid: spatial mismatch between " + shape_str(fused_global.shape()) +
                     " and " + shape_str(local.shape()));
  return concat_rows<T>({fused_global, local});
}

template <typename T>
FeatureSet<T> extract_features(const Tensor<T>& image, ParameterStore<T>& store,
                               const encoder::ViTConfig& vit, const FeatureConfig& cfg,
                               bool training) {
  if (image.rank() != 3 || image.size(0) != 3)
    throw ShapeError("extract_features: expected a [3 x H x W] image, got " +
                     shape_str(image.shape()));
  const std::size_t h = image.size(1), w = image.size(2);
  const std::size_t block = 2 * static_cast<std::size_t>(vit.patch_size);
  if (h % block != 0 || w % block != 0)
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be divisible by twice the patch size (" + std::to_string(block) + ")");
  const auto enc = encoder::encode(image, store, vit);
  FeatureSet<T> fs;
  std::size_t rank = 0;
  for (const auto& [layer, tokens] : enc.taps)
    fs.global_levels.emplace(layer, decode_level(reassemble(tokens, enc.grid), layer, rank++, store));
  fs.fused_global = fuse_global(fs.global_levels, h / 2, w / 2, store);
  fs.local = cfg.use_local ? local_features(image, store, cfg, training)
                           : Tensor<T>::zeros({sz(cfg.local_dim), h / 2, w / 2});
  fs.hybrid = fuse_hybrid(fs.fused_global, fs.local);
  return fs;
}

#define VITNERF_INSTANTIATE_FEATURES(T)                                                      \
  template Tensor<T> reassemble(const Tensor<T>&, encoder::Grid);                           \
  template void init_features(ParameterStore<T>&, const encoder::ViTConfig&,                \
                              const FeatureConfig&, Rng&);                                  \
  template Tensor<T> decode_level(const Tensor<T>&, int, std::size_t,                       \
                                  const ParameterStore<T>&);                                \
  template Tensor<T> fuse_global(const std::map<int, Tensor<T>>&, std::size_t, std::size_t, \
                                 const ParameterStore<T>&);                                 \
  template Tensor<T> local_features(const Tensor<T>&, ParameterStore<T>&,                   \
                                    const FeatureConfig&, bool);                            \
  template Tensor<T> fuse_hybrid(const Tensor<T>&, const Tensor<T>&);                       \
  template FeatureSet<T> extract_features(const Tensor<T>&, ParameterStore<T>&,             \
                                          const encoder::ViTConfig&, const FeatureConfig&,  \
                                          bool);

VITNERF_INSTANTIATE_FEATURES(float)
VITNERF_INSTANTIATE_FEATURES(double)

}  // namespace vitnerf::features
