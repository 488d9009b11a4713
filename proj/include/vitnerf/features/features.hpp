#pragma once

#include <map>
#include <vector>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/encoder/vit.hpp"
#include "vitnerf/tensor/parameters.hpp"

namespace vitnerf::features {

struct FeatureConfig {
  // 1x1 projection width per tap rank; empty means D/8, D/4, D/2, D.
  std::vector<int> level_channels;
  int level_out = 16;   // channels of every decoded level
  int fuse_mid = 32;    // first fusion conv
  int global_dim = 32;  // C_G
  int local_dim = 16;   // D_L
  int local_blocks = 3;
  bool use_local = true;  // false zeroes W_L (global-only ablation)
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::vector<int> level_widths(int latent_dim, std::size_t levels) const;
  void validate(int latent_dim, std::size_t levels) const;
};

template <typename T>
struct FeatureSet {
  std::map<int, Tensor<T>> global_levels;  // tap layer -> [C x H_j x W_j]
  Tensor<T> fused_global;                  // [C_G x H/2 x W/2]
  Tensor<T> local;                         // [D_L x H/2 x W/2]
  Tensor<T> hybrid;                        // [(C_G + D_L) x H/2 x W/2]
};

/// Spatial factor applied by decode_level to the token grid, by tap rank
/// (0-based): 4, 2, 1, 1/2.
double level_scale(std::size_t rank);

/// Drop the background token and lay the rest out channels-first on `grid`.
template <typename T>
Tensor<T> reassemble(const Tensor<T>& tokens, encoder::Grid grid);

template <typename T>
void init_features(ParameterStore<T>& store, const encoder::ViTConfig& vit,
                   const FeatureConfig& cfg, Rng& rng);

/// Decoder branch of the tap with the given 0-based rank among the taps.
template <typename T>
Tensor<T> decode_level(const Tensor<T>& map, int layer, std::size_t rank,
                       const ParameterStore<T>& store);

/// Resize every level to out_h x out_w, concatenate in ascending layer order,
/// then conv3x3-ReLU-conv3x3-ReLU.
template <typename T>
Tensor<T> fuse_global(const std::map<int, Tensor<T>>& levels, std::size_t out_h,
                      std::size_t out_w, const ParameterStore<T>& store);

/// Stride-2 stem followed by residual blocks; `training` selects batch
/// statistics (and updates the running ones).
template <typename T>
Tensor<T> local_features(const Tensor<T>& image, ParameterStore<T>& store,
                         const FeatureConfig& cfg, bool training);

template <typename T>
Tensor<T> fuse_hybrid(const Tensor<T>& fused_global, const Tensor<T>& local);

/// Full pipeline from the source image.
template <typename T>
FeatureSet<T> extract_features(const Tensor<T>& image, ParameterStore<T>& store,
                               const encoder::ViTConfig& vit, const FeatureConfig& cfg,
                               bool training);

}  // namespace vitnerf::features
