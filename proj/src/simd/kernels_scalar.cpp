#include <algorithm>
#include <cmath>

#include "vitnerf/simd/kernels.hpp"

namespace vitnerf::simd::detail {
namespace {

template <typename T>
void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const T* a,
                 std::size_t a_rs, std::size_t a_cs, const T* b,
                 std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * a_rs + p * a_cs];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
T dot_scalar(const T* x, const T* y, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy_scalar(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void relu_scalar(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward_scalar(const T* x, const T* gy, T* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gx[i] += gy[i];
}

template <typename T>
void adam_scalar(T* param, T* m, T* v, const T* grad, std::size_t n,
                 const AdamStep<T>& s) {
  const T one_minus_b1 = T(1) - s.beta1;
  const T one_minus_b2 = T(1) - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    const T mi = s.beta1 * m[i] + one_minus_b1 * g;
    const T vi = s.beta2 * v[i] + one_minus_b2 * (g * g);
    m[i] = mi;
    v[i] = vi;
    const T mhat = mi / s.bias_correction1;
    const T vhat = vi / s.bias_correction2;
    param[i] = param[i] - (s.lr * mhat) / (std::sqrt(vhat) + s.eps);
  }
}

template <typename T>
constexpr KernelTable<T> make_table() {
  return {&gemm_scalar<T>, &dot_scalar<T>,           &axpy_scalar<T>,
          &relu_scalar<T>, &relu_backward_scalar<T>, &adam_scalar<T>};
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() {
  static constexpr KernelTable<T> table = make_table<T>();
  return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace vitnerf::simd::detail
