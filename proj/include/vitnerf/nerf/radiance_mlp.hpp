#pragma once

#include <string>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/tensor/parameters.hpp"

namespace vitnerf::nerf {

struct MlpConfig {
  int frequencies = 10;  // M
  int width = 64;
  int blocks = 2;

  /// 6M (encoded position) + 3 (direction) + feature channels.
  int input_dim(int feature_dim) const { return 6 * frequencies + 3 + feature_dim; }
  void validate() const;
};

template <typename T>
struct RadianceOutput {
  Tensor<T> sigma;  // [n x 1], >= 0
  Tensor<T> color;  // [n x 3], in (0, 1)
};

/// Registers "<prefix>.linear_in", "<prefix>.block<b>.fc1/fc2",
/// "<prefix>.sigma_head" and "<prefix>.color_head".
template <typename T>
void init_radiance_mlp(ParameterStore<T>& store, const std::string& prefix, const MlpConfig& cfg,
                       int feature_dim, Rng& rng);

/// h = linear_in([enc_x ; d_c ; feat]); each block h <- relu(h + fc2(relu(fc1(h))));
/// sigma = softplus(sigma_head(h)), color = sigmoid(color_head(h)).
template <typename T>
RadianceOutput<T> radiance_mlp(const Tensor<T>& enc_x, const Tensor<T>& d_c,
                               const Tensor<T>& feat, const ParameterStore<T>& store,
                               const std::string& prefix, const MlpConfig& cfg);

}  // namespace vitnerf::nerf
