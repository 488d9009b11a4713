#pragma once

#include <span>
#include <vector>

#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf::nerf {

/// Sinusoidal encoding of each row of p[n x k]: per scalar
/// (sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(M-1) pi p), cos(2^(M-1) pi p)),
/// scalars concatenated in order. Result is [n x 2Mk]. The raw value is not
/// included.
template <typename T>
Tensor<T> gamma(const Tensor<T>& p, int frequencies);

/// Plain-value form of the same encoding.
std::vector<double> gamma(std::span<const double> p, int frequencies);

}  // namespace vitnerf::nerf
