#pragma once

// Inner-loop kernels behind the tensor ops. Every kernel has a portable
// scalar reference and, on x86-64, an AVX2/FMA variant compiled in its own
// translation unit. The variant is chosen once at startup from CPUID and can
// be pinned with set_backend() or VITNERF_SIMD=scalar|avx2.

#include <cstddef>
#include <string_view>

namespace vitnerf::simd {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b);

/// True when the backend was compiled in and the CPU can run it.
bool backend_supported(Backend b);

Backend active_backend();

/// Throws UnsupportedConfig if `b` is not supported on this machine.
void set_backend(Backend b);

template <typename T>
struct AdamStep {
  T lr;
  T beta1;
  T beta2;
  T eps;
  T bias_correction1;  // 1 - beta1^t
  T bias_correction2;  // 1 - beta2^t
};

template <typename T>
struct KernelTable {
  // C[m x n] += A(i, p) * B[p x n] for p < k.
  // A(i, p) lives at a[i * a_rs + p * a_cs]; B and C are row-major with
  // leading dimensions ldb and ldc.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a,
               std::size_t a_rs, std::size_t a_cs, const T* b, std::size_t ldb,
               T* c, std::size_t ldc);
  T (*dot)(const T* x, const T* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  void (*relu)(const T* x, T* y, std::size_t n);
  // gx += gy where x > 0
  void (*relu_backward)(const T* x, const T* gy, T* gx, std::size_t n);
  // One Adam update, elementwise over n parameters. Scalar and SIMD variants
  // evaluate the same expression tree without contraction, so they agree
  // bit for bit.
  void (*adam)(T* param, T* m, T* v, const T* grad, std::size_t n,
               const AdamStep<T>& step);
};

template <typename T>
const KernelTable<T>& kernels(Backend b);

/// Table for the active backend.
template <typename T>
const KernelTable<T>& kernels();

namespace detail {
template <typename T>
const KernelTable<T>& scalar_table();
#if defined(VITNERF_HAVE_AVX2)
template <typename T>
const KernelTable<T>& avx2_table();
#endif
}  // namespace detail

}  // namespace vitnerf::simd
