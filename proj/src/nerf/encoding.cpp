#include "vitnerf/nerf/encoding.hpp"

#include <cmath>
#include <numbers>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::nerf {

template <typename T>
Tensor<T> gamma(const Tensor<T>& p, int frequencies) {
  if (frequencies < 1) throw ArgumentError("gamma: frequency count must be at least 1");
  if (p.rank() != 2) throw ShapeError("gamma: expected [n x k] input, got " + shape_str(p.shape()));
  const std::size_t n = p.size(0), k = p.size(1), m = static_cast<std::size_t>(frequencies);
  const std::size_t width = 2 * m * k;
  std::vector<T> out(n * width);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double v = static_cast<double>(p[i * k + j]);
      for (std::size_t f = 0; f < m; ++f) {
        const double a = std::ldexp(std::numbers::pi, static_cast<int>(f)) * v;
        out[i * width + (j * m + f) * 2] = static_cast<T>(std::sin(a));
        out[i * width + (j * m + f) * 2 + 1] = static_cast<T>(std::cos(a));
      }
    }
  return Tensor<T>::make_op({n, width}, std::move(out), {p},
                            [n, k, m, width](TensorNode<T>& self) {
    auto& parent = self.parents[0];
    if (!parent || !parent->requires_grad) return;
    T* g = parent->grad_buffer().data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t f = 0; f < m; ++f) {
          const T freq = static_cast<T>(std::ldexp(std::numbers::pi, static_cast<int>(f)));
          const T s = self.data[i * width + (j * m + f) * 2];
          const T c = self.data[i * width + (j * m + f) * 2 + 1];
          g[i * k + j] += freq * (c * self.grad[i * width + (j * m + f) * 2] -
                                  s * self.grad[i * width + (j * m + f) * 2 + 1]);
        }
  });
}

std::vector<double> gamma(std::span<const double> p, int frequencies) {
  if (frequencies < 1) throw ArgumentError("gamma: frequency count must be at least 1");
  std::vector<double> out;
  out.reserve(p.size() * 2 * static_cast<std::size_t>(frequencies));
  for (double v : p)
    for (int f = 0; f < frequencies; ++f) {
      const double a = std::ldexp(std::numbers::pi, f) * v;
      out.push_back(std::sin(a));
      out.push_back(std::cos(a));
    }
  return out;
}

template Tensor<float> gamma(const Tensor<float>&, int);
template Tensor<double> gamma(const Tensor<double>&, int);

}  // namespace vitnerf::nerf
