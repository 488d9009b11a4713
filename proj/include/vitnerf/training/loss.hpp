#pragma once

#include <span>

#include "vitnerf/nerf/composite.hpp"
#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf::training {

/// sum_r ||rendered_r - truth_r||^2 over [rays x 3] tensors.
template <typename T>
Tensor<T> l2_loss(const Tensor<T>& rendered, const Tensor<T>& truth);

double l2_loss(std::span<const nerf::Color> rendered, std::span<const nerf::Color> truth);

}  // namespace vitnerf::training
