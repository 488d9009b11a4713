#include "vitnerf/encoder/vit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::encoder {
namespace {

std::string layer_prefix(int layer) { return "vit.layer" + std::to_string(layer) + "."; }

template <typename T>
void add_linear(ParameterStore<T>& store, const std::string& name, int in, int out,
                double stddev, Rng& rng) {
  store.add(name + ".weight",
            truncated_normal_tensor<T>({static_cast<std::size_t>(in),
                                        static_cast<std::size_t>(out)},
                                       stddev, rng));
  store.add(name + ".bias", Tensor<T>::zeros({static_cast<std::size_t>(out)}));
}

template <typename T>
void add_layernorm(ParameterStore<T>& store, const std::string& name, int dim) {
  store.add(name + ".gain", Tensor<T>::full({static_cast<std::size_t>(dim)}, T(1)));
  store.add(name + ".bias", Tensor<T>::zeros({static_cast<std::size_t>(dim)}));
}

template <typename T>
Tensor<T> apply_linear(const Tensor<T>& x, const ParameterStore<T>& store,
                       const std::string& name) {
  return linear(x, store.get(name + ".weight"), store.get(name + ".bias"));
}

template <typename T>
Tensor<T> apply_layernorm(const Tensor<T>& x, const ParameterStore<T>& store,
                          const std::string& name, double eps) {
  return layernorm(x, store.get(name + ".gain"), store.get(name + ".bias"), static_cast<T>(eps));
}

// Image-token part of the stored embedding, resized to `grid`.
template <typename T>
Tensor<T> resized_positions(const Tensor<T>& pos, const ViTConfig& cfg, Grid grid) {
  const std::size_t d = pos.size(1);
  const std::size_t stored = static_cast<std::size_t>(cfg.pos_grid_rows) * cfg.pos_grid_cols;
  Tensor<T> img = slice_rows(pos, 1, 1 + stored);
  if (cfg.pos_grid_rows == grid.rows && cfg.pos_grid_cols == grid.cols) return img;
  Tensor<T> map = reshape(transpose(img), {d, static_cast<std::size_t>(cfg.pos_grid_rows),
                                           static_cast<std::size_t>(cfg.pos_grid_cols)});
  map = bilinear_resize(map, static_cast<std::size_t>(grid.rows),
                        static_cast<std::size_t>(grid.cols));
  return transpose(reshape(map, {d, static_cast<std::size_t>(grid.count())}));
}

}  // namespace

std::vector<int> default_taps(int depth) {
  std::vector<int> taps;
  for (int k = 1; k <= 4; ++k) {
    const int t = (k * depth + 3) / 4;
    if (t >= 1 && (taps.empty() || taps.back() != t)) taps.push_back(t);
  }
  return taps;
}

std::vector<int> ViTConfig::taps() const {
  return tap_layers.empty() ? default_taps(depth) : tap_layers;
}

void ViTConfig::validate() const {
  if (patch_size < 1) throw ArgumentError("vit patch size must be positive");
  if (depth < 1) throw ArgumentError("vit depth must be positive");
  if (latent_dim < 1 || heads < 1 || latent_dim % heads != 0)
    throw ArgumentError("vit latent dim " + std::to_string(latent_dim) +
                        " must be a positive multiple of heads " + std::to_string(heads));
  if (!(mlp_ratio > 0.0)) throw ArgumentError("vit mlp ratio must be positive");
  if (pos_grid_rows < 1 || pos_grid_cols < 1)
    throw ArgumentError("vit positional grid must be positive");
  const auto t = taps();
  if (t.empty() || t.size() > 4)
    throw ArgumentError("vit needs between 1 and 4 tap layers, got " + std::to_string(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 1 || t[i] > depth)
      throw ArgumentError("tap layer " + std::to_string(t[i]) + " outside 1.." +
                          std::to_string(depth));
    if (i > 0 && t[i] <= t[i - 1]) throw ArgumentError("tap layers must be strictly increasing");
  }
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& image, int patch) {
  if (image.rank() != 3 || image.size(0) != 3)
    throw ShapeError("patchify: expected a [3 x H x W] image, got " + shape_str(image.shape()));
  const std::size_t h = image.size(1), w = image.size(2), p = static_cast<std::size_t>(patch);
  if (patch < 1 || h % p != 0 || w % p != 0)
    throw ShapeError("patchify: image " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by patch size " + std::to_string(patch));
  const std::size_t gh = h / p, gw = w / p, row = p * p * 3;
  std::vector<std::size_t> index(gh * gw * row);
  std::size_t k = 0;
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx)
      for (std::size_t py = 0; py < p; ++py)
        for (std::size_t px = 0; px < p; ++px)
          for (std::size_t c = 0; c < 3; ++c)
            index[k++] = (c * h + gy * p + py) * w + gx * p + px;
  return gather(image, {gh * gw, row}, std::move(index));
}

template <typename T>
Tensor<T> unpatchify(const Tensor<T>& patches, int patch, int height, int width) {
  const std::size_t p = static_cast<std::size_t>(patch), h = static_cast<std::size_t>(height),
                    w = static_cast<std::size_t>(width);
  if (patch < 1 || height < 1 || width < 1 || h % p != 0 || w % p != 0)
    throw ShapeError("unpatchify: size not divisible by patch size");
  const std::size_t gw = w / p, row = p * p * 3;
  if (patches.rank() != 2 || patches.size(0) != (h / p) * gw || patches.size(1) != row)
    throw ShapeError("unpatchify: patches of shape " + shape_str(patches.shape()) +
                     " do not tile a " + std::to_string(h) + "x" + std::to_string(w) + " image");
  std::vector<std::size_t> index(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t patch_id = (y / p) * gw + x / p;
        index[(c * h + y) * w + x] = patch_id * row + ((y % p) * p + x % p) * 3 + c;
      }
  return gather(patches, {3, h, w}, std::move(index));
}

template <typename T>
void init_vit(ParameterStore<T>& store, const ViTConfig& cfg, Rng& rng) {
  cfg.validate();
  const int d = cfg.latent_dim;
  const int patch_dim = cfg.patch_size * cfg.patch_size * 3;
  const auto du = static_cast<std::size_t>(d);
  add_linear(store, "vit.patch_proj", patch_dim, d, 0.02, rng);
  store.add("vit.bg_token", truncated_normal_tensor<T>({1, du}, 0.02, rng));
  const std::size_t positions = 1 + static_cast<std::size_t>(cfg.pos_grid_rows) * cfg.pos_grid_cols;
  store.add("vit.pos_embed", truncated_normal_tensor<T>({positions, du}, 0.02, rng));
  const int hidden = static_cast<int>(std::lround(cfg.mlp_ratio * d));
  for (int l = 1; l <= cfg.depth; ++l) {
    const std::string pre = layer_prefix(l);
    add_layernorm(store, pre + "ln1", d);
    add_linear(store, pre + "msa.q_proj", d, d, 0.02, rng);
    add_linear(store, pre + "msa.k_proj", d, d, 0.02, rng);
    add_linear(store, pre + "msa.v_proj", d, d, 0.02, rng);
    add_linear(store, pre + "msa.out_proj", d, d, 0.02, rng);
    add_layernorm(store, pre + "ln2", d);
    add_linear(store, pre + "mlp.fc1", d, hidden, 0.02, rng);
    add_linear(store, pre + "mlp.fc2", hidden, d, 0.02, rng);
  }
}

template <typename T>
TokenSequence<T> embed(const Tensor<T>& patches, Grid grid, const ParameterStore<T>& store,
                       const ViTConfig& cfg) {
  if (patches.rank() != 2 || patches.size(0) != static_cast<std::size_t>(grid.count()))
    throw ShapeError("embed: " + shape_str(patches.shape()) + " patches for a " +
                     std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
  const Tensor<T> projected = apply_linear(patches, store, "vit.patch_proj");
  const Tensor<T>& pos = store.get("vit.pos_embed");
  const Tensor<T> image_tokens = add(projected, resized_positions(pos, cfg, grid));
  const Tensor<T> bg = add(store.get("vit.bg_token"), slice_rows(pos, 0, 1));
  return {concat_rows<T>({bg, image_tokens}), grid};
}

template <typename T>
Tensor<T> transformer_layer(const Tensor<T>& tokens, const ParameterStore<T>& store, int layer,
                            const ViTConfig& cfg, AttentionTrace<T>* trace) {
  const std::string pre = layer_prefix(layer);
  const std::size_t d = static_cast<std::size_t>(cfg.latent_dim);
  if (tokens.rank() != 2 || tokens.size(1) != d)
    throw ShapeError("transformer_layer: expected [n x " + std::to_string(d) + "] tokens, got " +
                     shape_str(tokens.shape()));
  const std::size_t heads = static_cast<std::size_t>(cfg.heads), dh = d / heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  const Tensor<T> x = apply_layernorm(tokens, store, pre + "ln1", cfg.layernorm_eps);
  const Tensor<T> q = apply_linear(x, store, pre + "msa.q_proj");
  const Tensor<T> k = apply_linear(x, store, pre + "msa.k_proj");
  const Tensor<T> v = apply_linear(x, store, pre + "msa.v_proj");
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  if (trace) trace->heads.clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
    const Tensor<T> attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
    if (trace) trace->heads.push_back(attn);
    outs.push_back(matmul(attn, vh));
  }
  const Tensor<T> msa = apply_linear(heads == 1 ? outs[0] : concat_cols(outs), store,
                                     pre + "msa.out_proj");
  const Tensor<T> y = add(tokens, msa);
  const Tensor<T> z = apply_layernorm(y, store, pre + "ln2", cfg.layernorm_eps);
  const Tensor<T> mlp =
      apply_linear(gelu(apply_linear(z, store, pre + "mlp.fc1")), store, pre + "mlp.fc2");
  return add(y, mlp);
}

template <typename T>
EncoderOutput<T> encode(const Tensor<T>& image, const ParameterStore<T>& store,
                        const ViTConfig& cfg) {
  const auto taps = cfg.taps();
  const Tensor<T> patches = patchify(image, cfg.patch_size);
  const Grid grid{static_cast<int>(image.size(1)) / cfg.patch_size,
                  static_cast<int>(image.size(2)) / cfg.patch_size};
  Tensor<T> tokens = embed(patches, grid, store, cfg).tokens;
  EncoderOutput<T> out;
  out.grid = grid;
  for (int l = 1; l <= taps.back(); ++l) {
    tokens = transformer_layer(tokens, store, l, cfg);
    if (std::find(taps.begin(), taps.end(), l) != taps.end()) out.taps.emplace(l, tokens);
  }
  return out;
}

#define VITNERF_INSTANTIATE_VIT(T)                                                           \
  template Tensor<T> patchify(const Tensor<T>&, int);                                       \
  template Tensor<T> unpatchify(const Tensor<T>&, int, int, int);                           \
  template void init_vit(ParameterStore<T>&, const ViTConfig&, Rng&);                       \
  template TokenSequence<T> embed(const Tensor<T>&, Grid, const ParameterStore<T>&,         \
                                  const ViTConfig&);                                        \
  template Tensor<T> transformer_layer(const Tensor<T>&, const ParameterStore<T>&, int,     \
                                       const ViTConfig&, AttentionTrace<T>*);               \
  template EncoderOutput<T> encode(const Tensor<T>&, const ParameterStore<T>&, const ViTConfig&);

VITNERF_INSTANTIATE_VIT(float)
VITNERF_INSTANTIATE_VIT(double)

}  // namespace vitnerf::encoder
