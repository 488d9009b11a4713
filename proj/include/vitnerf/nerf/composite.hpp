#pragma once

#include <array>
#include <span>
#include <vector>

#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf::nerf {

using Color = std::array<double, 3>;

struct RenderResult {
  Color color{};
  std::vector<double> t;
  std::vector<double> weights;
  std::vector<double> transmittance;  // T_i before sample i; T_1 = 1
  double acc_alpha = 0.0;             // sum of weights
  double residual = 1.0;              // transmittance past the last sample
};

/// Quadrature along one ray. delta_i = t_{i+1} - t_i, the last one t_far - t_N.
/// Throws ArgumentError unless t is strictly increasing and t_N <= t_far.
RenderResult composite(std::span<const double> t, std::span<const double> sigma,
                       std::span<const Color> colors, double t_far, const Color& background);

template <typename T>
struct CompositeOutput {
  Tensor<T> color;  // [rays x 3]
  std::vector<RenderResult> rays;
};

/// Differentiable batch form: `sigma` holds rays * S densities and `color`
/// is [rays * S x 3], ray-major; `t` holds the matching depths.
template <typename T>
CompositeOutput<T> composite_rays(const Tensor<T>& sigma, const Tensor<T>& color,
                                  std::span<const double> t, std::size_t samples_per_ray,
                                  double t_far, const Color& background);

}  // namespace vitnerf::nerf
