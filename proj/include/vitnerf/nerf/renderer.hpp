#pragma once

#include <vector>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/geometry/camera.hpp"
#include "vitnerf/nerf/composite.hpp"
#include "vitnerf/nerf/radiance_mlp.hpp"
#include "vitnerf/tensor/parameters.hpp"

namespace vitnerf::nerf {

struct SamplingConfig {
  int n_coarse = 16;
  int n_fine = 16;
  bool jitter = true;
  Color background{0.0, 0.0, 0.0};
  double t_near = 2.0;
  double t_far = 6.0;

  void validate() const;
};

template <typename T>
struct RenderOutput {
  Tensor<T> coarse_color;  // [rays x 3]
  Tensor<T> fine_color;    // [rays x 3]
  std::vector<RenderResult> coarse;
  std::vector<RenderResult> fine;
};

/// Samples along world-space rays expressed in the source camera: encoded
/// positions, directions and the hybrid feature lookup W(pi(x)).
template <typename T>
struct ConditionedSamples {
  Tensor<T> encoded;    // [n x 6M]
  Tensor<T> direction;  // [n x 3]
  Tensor<T> feature;    // [n x C]
  std::vector<unsigned char> valid;
};

/// `t` holds samples_per_ray depths per ray, ray-major.
template <typename T>
ConditionedSamples<T> condition_samples(const std::vector<geometry::Ray>& rays,
                                        std::span<const double> t, std::size_t samples_per_ray,
                                        const geometry::CameraModel& source,
                                        const Tensor<T>& hybrid, int frequencies);

/// Hierarchical rendering: coarse network on stratified depths, importance
/// resampling from the coarse weights, fine network on the merged depths.
/// `fixed_fine_t`, when given, supplies the merged depths of every ray
/// (n_coarse + n_fine each) instead of drawing them.
template <typename T>
RenderOutput<T> render_rays(const std::vector<geometry::Ray>& rays,
                            const geometry::CameraModel& source, const Tensor<T>& hybrid,
                            const ParameterStore<T>& store, const MlpConfig& mlp,
                            const SamplingConfig& sampling, Rng* rng,
                            const std::vector<std::vector<double>>* fixed_fine_t = nullptr);

}  // namespace vitnerf::nerf
