#pragma once

#include <map>
#include <string>
#include <vector>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/tensor/parameters.hpp"

namespace vitnerf::encoder {

struct ViTConfig {
  int patch_size = 8;
  int depth = 4;
  int latent_dim = 64;
  int heads = 4;
  double mlp_ratio = 4.0;
  std::vector<int> tap_layers;  // empty: default_taps(depth)
  // Grid the stored positional embedding is laid out on.
  int pos_grid_rows = 8;
  int pos_grid_cols = 8;
  double layernorm_eps = 1e-6;

  std::vector<int> taps() const;
  /// Throws ArgumentError on inconsistent fields.
  void validate() const;
};

/// Four taps spread evenly over the depth: {3, 6, 9, 12} for 12 layers.
std::vector<int> default_taps(int depth);

struct Grid {
  int rows = 0;
  int cols = 0;
  int count() const { return rows * cols; }
};

template <typename T>
struct TokenSequence {
  Tensor<T> tokens;  // [(N + 1) x D]; row 0 is the background token
  Grid grid;
};

/// image[3 x H x W] -> [N x (P*P*3)], patches row-major over the grid, each
/// flattened channel-last.
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, int patch);

template <typename T>
Tensor<T> unpatchify(const Tensor<T>& patches, int patch, int height, int width);

/// Registers the encoder's parameters under "vit.".
template <typename T>
void init_vit(ParameterStore<T>& store, const ViTConfig& cfg, Rng& rng);

template <typename T>
TokenSequence<T> embed(const Tensor<T>& patches, Grid grid, const ParameterStore<T>& store,
                       const ViTConfig& cfg);

/// Attention probabilities of each head, filled when requested.
template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> heads;
};

/// Pre-norm block: x + MSA(LN(x)), then + MLP(LN(.)) with GELU. `layer` is
/// 1-based.
template <typename T>
Tensor<T> transformer_layer(const Tensor<T>& tokens, const ParameterStore<T>& store, int layer,
                            const ViTConfig& cfg, AttentionTrace<T>* trace = nullptr);

template <typename T>
struct EncoderOutput {
  std::map<int, Tensor<T>> taps;  // layer -> [(N + 1) x D]
  Grid grid;
};

template <typename T>
EncoderOutput<T> encode(const Tensor<T>& image, const ParameterStore<T>& store,
                        const ViTConfig& cfg);

}  // namespace vitnerf::encoder
