// Compiled with -mavx2 -mfma -ffp-contract=off. Only reached through the
// dispatch table after a CPUID check.

#include <immintrin.h>

#include "vitnerf/simd/kernels.hpp"

namespace vitnerf::simd::detail {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr std::size_t W = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V sub(V a, V b) { return _mm256_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V div(V a, V b) { return _mm256_div_ps(a, b); }
  static V sqrt(V a) { return _mm256_sqrt_ps(a); }
  static V max(V a, V b) { return _mm256_max_ps(a, b); }
  static V gt_zero_mask(V a) { return _mm256_cmp_ps(a, zero(), _CMP_GT_OQ); }
  static V and_(V a, V b) { return _mm256_and_ps(a, b); }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t W = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V sub(V a, V b) { return _mm256_sub_pd(a, b); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static V div(V a, V b) { return _mm256_div_pd(a, b); }
  static V sqrt(V a) { return _mm256_sqrt_pd(a); }
  static V max(V a, V b) { return _mm256_max_pd(a, b); }
  static V gt_zero_mask(V a) { return _mm256_cmp_pd(a, zero(), _CMP_GT_OQ); }
  static V and_(V a, V b) { return _mm256_and_pd(a, b); }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// MR rows by NV vectors of C, accumulated in registers over kc steps of p.
template <class Tr, int MR, int NV>
inline void gemm_tile(std::size_t kc, const typename Tr::T* a, std::size_t a_rs,
                      std::size_t a_cs, const typename Tr::T* b,
                      std::size_t ldb, typename Tr::T* c, std::size_t ldc) {
  using V = typename Tr::V;
  V acc[MR][NV];
#pragma GCC unroll 8
  for (int r = 0; r < MR; ++r)
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) acc[r][v] = Tr::zero();
  for (std::size_t p = 0; p < kc; ++p) {
    V bv[NV];
    const typename Tr::T* brow = b + p * ldb;
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) bv[v] = Tr::load(brow + v * Tr::W);
    const typename Tr::T* acol = a + p * a_cs;
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
      const V av = Tr::set1(acol[r * a_rs]);
#pragma GCC unroll 4
      for (int v = 0; v < NV; ++v) acc[r][v] = Tr::fmadd(av, bv[v], acc[r][v]);
    }
  }
#pragma GCC unroll 8
  for (int r = 0; r < MR; ++r)
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) {
      typename Tr::T* cp = c + r * ldc + v * Tr::W;
      Tr::store(cp, Tr::add(Tr::load(cp), acc[r][v]));
    }
}

template <class Tr, int MR>
inline void gemm_rows(std::size_t n, std::size_t kc, const typename Tr::T* a,
                      std::size_t a_rs, std::size_t a_cs,
                      const typename Tr::T* b, std::size_t ldb,
                      typename Tr::T* c, std::size_t ldc) {
  constexpr std::size_t W = Tr::W;
  std::size_t j = 0;
  for (; j + 2 * W <= n; j += 2 * W)
    gemm_tile<Tr, MR, 2>(kc, a, a_rs, a_cs, b + j, ldb, c + j, ldc);
  for (; j + W <= n; j += W)
    gemm_tile<Tr, MR, 1>(kc, a, a_rs, a_cs, b + j, ldb, c + j, ldc);
  for (; j < n; ++j) {
    for (int r = 0; r < MR; ++r) {
      typename Tr::T s = 0;
      for (std::size_t p = 0; p < kc; ++p)
        s += a[r * a_rs + p * a_cs] * b[p * ldb + j];
      c[r * ldc + j] += s;
    }
  }
}

template <class Tr>
void gemm_avx2(std::size_t m, std::size_t n, std::size_t k,
               const typename Tr::T* a, std::size_t a_rs, std::size_t a_cs,
               const typename Tr::T* b, std::size_t ldb, typename Tr::T* c,
               std::size_t ldc) {
  constexpr std::size_t kBlockK = 256;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    const std::size_t kc = (k - p0 < kBlockK) ? k - p0 : kBlockK;
    const typename Tr::T* ap = a + p0 * a_cs;
    const typename Tr::T* bp = b + p0 * ldb;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4)
      gemm_rows<Tr, 4>(n, kc, ap + i * a_rs, a_rs, a_cs, bp, ldb, c + i * ldc,
                       ldc);
    for (; i < m; ++i)
      gemm_rows<Tr, 1>(n, kc, ap + i * a_rs, a_rs, a_cs, bp, ldb, c + i * ldc,
                       ldc);
  }
}

template <class Tr>
typename Tr::T dot_avx2(const typename Tr::T* x, const typename Tr::T* y,
                        std::size_t n) {
  constexpr std::size_t W = Tr::W;
  typename Tr::V s0 = Tr::zero(), s1 = Tr::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    s0 = Tr::fmadd(Tr::load(x + i), Tr::load(y + i), s0);
    s1 = Tr::fmadd(Tr::load(x + i + W), Tr::load(y + i + W), s1);
  }
  for (; i + W <= n; i += W) s0 = Tr::fmadd(Tr::load(x + i), Tr::load(y + i), s0);
  typename Tr::T s = Tr::hsum(Tr::add(s0, s1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <class Tr>
void axpy_avx2(typename Tr::T alpha, const typename Tr::T* x,
               typename Tr::T* y, std::size_t n) {
  constexpr std::size_t W = Tr::W;
  const typename Tr::V av = Tr::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W)
    Tr::store(y + i, Tr::add(Tr::load(y + i), Tr::mul(av, Tr::load(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class Tr>
void relu_avx2(const typename Tr::T* x, typename Tr::T* y, std::size_t n) {
  constexpr std::size_t W = Tr::W;
  std::size_t i = 0;
  for (; i + W <= n; i += W)
    Tr::store(y + i, Tr::and_(Tr::load(x + i), Tr::gt_zero_mask(Tr::load(x + i))));
  for (; i < n; ++i) y[i] = x[i] > 0 ? x[i] : typename Tr::T(0);
}

template <class Tr>
void relu_backward_avx2(const typename Tr::T* x, const typename Tr::T* gy,
                        typename Tr::T* gx, std::size_t n) {
  constexpr std::size_t W = Tr::W;
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto mask = Tr::gt_zero_mask(Tr::load(x + i));
    Tr::store(gx + i, Tr::add(Tr::load(gx + i), Tr::and_(Tr::load(gy + i), mask)));
  }
  for (; i < n; ++i)
    if (x[i] > 0) gx[i] += gy[i];
}

template <class Tr>
void adam_avx2(typename Tr::T* param, typename Tr::T* m, typename Tr::T* v,
               const typename Tr::T* grad, std::size_t n,
               const AdamStep<typename Tr::T>& s) {
  using T = typename Tr::T;
  constexpr std::size_t W = Tr::W;
  const T omb1 = T(1) - s.beta1;
  const T omb2 = T(1) - s.beta2;
  const auto b1 = Tr::set1(s.beta1), b2 = Tr::set1(s.beta2);
  const auto c1 = Tr::set1(omb1), c2 = Tr::set1(omb2);
  const auto bc1 = Tr::set1(s.bias_correction1), bc2 = Tr::set1(s.bias_correction2);
  const auto lr = Tr::set1(s.lr), eps = Tr::set1(s.eps);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto g = Tr::load(grad + i);
    const auto mi = Tr::add(Tr::mul(b1, Tr::load(m + i)), Tr::mul(c1, g));
    const auto vi = Tr::add(Tr::mul(b2, Tr::load(v + i)), Tr::mul(c2, Tr::mul(g, g)));
    Tr::store(m + i, mi);
    Tr::store(v + i, vi);
    const auto mhat = Tr::div(mi, bc1);
    const auto vhat = Tr::div(vi, bc2);
    const auto step = Tr::div(Tr::mul(lr, mhat), Tr::add(Tr::sqrt(vhat), eps));
    Tr::store(param + i, Tr::sub(Tr::load(param + i), step));
  }
  for (; i < n; ++i) {
    const T g = grad[i];
    const T mi = s.beta1 * m[i] + omb1 * g;
    const T vi = s.beta2 * v[i] + omb2 * (g * g);
    m[i] = mi;
    v[i] = vi;
    const T mhat = mi / s.bias_correction1;
    const T vhat = vi / s.bias_correction2;
    param[i] = param[i] - (s.lr * mhat) / (__builtin_sqrt(vhat) + s.eps);
  }
}

template <class Tr>
KernelTable<typename Tr::T> make_table() {
  return {&gemm_avx2<Tr>, &dot_avx2<Tr>,           &axpy_avx2<Tr>,
          &relu_avx2<Tr>, &relu_backward_avx2<Tr>, &adam_avx2<Tr>};
}

}  // namespace

template <>
const KernelTable<float>& avx2_table<float>() {
  static const KernelTable<float> table = make_table<F32>();
  return table;
}

template <>
const KernelTable<double>& avx2_table<double>() {
  static const KernelTable<double> table = make_table<F64>();
  return table;
}

}  // namespace vitnerf::simd::detail
