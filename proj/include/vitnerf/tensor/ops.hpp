#pragma once

// Differentiable operations. Inputs are never modified; every result records
// a backward closure when gradient recording is on.
//
// Layout conventions: matrices are [rows x cols]; images and feature maps are
// channels-first [C x H x W]; token sequences are [tokens x dim].

#include <span>
#include <vector>

#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf {

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x[n x in] * w[in x out] + bias[out]. `bias` may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// Exact form x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);
template <typename T>
Tensor<T> sin(const Tensor<T>& x);
template <typename T>
Tensor<T> cos(const Tensor<T>& x);

/// Softmax over the last axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

/// Normalizes each last-axis vector, then applies gain and bias.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain,
                    const Tensor<T>& bias, T eps);

/// Same-padded (floor(k/2)) 2D convolution. weight is [C_out x C_in x k x k],
/// bias [C_out] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, std::size_t stride);

/// Transposed convolution with kernel == stride and no padding. weight is
/// [C_in x C_out x k x k].
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                            const Tensor<T>& bias, std::size_t stride);

template <typename T>
struct BatchNormStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

/// Per-channel normalization of one [C x H x W] map. In training mode batch
/// statistics are used and the running statistics are updated; otherwise the
/// running statistics are applied as a fixed affine map.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, BatchNormStats<T>& stats,
                      bool training, T momentum, T eps);

/// Bilinear lookup of map[C x H x W] at continuous pixel coordinates
/// uv[n x 2] (u along width). Pixel centers sit at (i + 0.5); lookups beyond
/// the border clamp to the edge. Rows flagged 0 in `valid` return zeros.
/// Result is [n x C].
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& map, const Tensor<T>& uv,
                          std::span<const unsigned char> valid = {});

/// Half-pixel-centered bilinear resize of [C x H x W] to [C x out_h x out_w].
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& map, std::size_t out_h,
                          std::size_t out_w);

/// out[i] = a[index[i]] over the flattened data, reshaped to `shape`.
/// Gradients scatter-add back.
template <typename T>
Tensor<T> gather(const Tensor<T>& a, Shape shape, std::vector<std::size_t> index);

/// Rows [begin, end) along axis 0.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end);

/// Columns [begin, end) of a matrix.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end);

/// Concatenation along axis 0.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

/// Concatenation of matrices along axis 1.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

/// sum((a - b)^2)
template <typename T>
Tensor<T> sum_squared_error(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace vitnerf
