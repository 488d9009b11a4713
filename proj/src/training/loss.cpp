#include "vitnerf/training/loss.hpp"

#include "vitnerf/core/errors.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::training {

template <typename T>
Tensor<T> l2_loss(const Tensor<T>& rendered, const Tensor<T>& truth) {
  if (rendered.rank() != 2 || rendered.size(1) != 3 || rendered.shape() != truth.shape())
    throw ShapeError("l2_loss: rendered " + shape_str(rendered.shape()) + " vs truth " +
                     shape_str(truth.shape()));
  return sum_squared_error(rendered, truth);
}

double l2_loss(std::span<const nerf::Color> rendered, std::span<const nerf::Color> truth) {
  if (rendered.size() != truth.size())
    throw ShapeError("l2_loss: " + std::to_string(rendered.size()) + " rendered colors vs " +
                     std::to_string(truth.size()) + " targets");
  double total = 0.0;
  for (std::size_t r = 0; r < rendered.size(); ++r)
    for (int c = 0; c < 3; ++c) {
      const double d = rendered[r][c] - truth[r][c];
      total += d * d;
    }
  return total;
}

template Tensor<float> l2_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> l2_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace vitnerf::training
