#include <cstdlib>
#include <string>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/simd/kernels.hpp"

namespace vitnerf::simd {
namespace {

bool cpu_has_avx2() {
#if defined(VITNERF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("VITNERF_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::Avx2;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

Backend& current() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

std::string_view backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

bool backend_supported(Backend b) {
  return b == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() { return current(); }

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw UnsupportedConfig("SIMD backend '" + std::string(backend_name(b)) +
                            "' is not available on this CPU");
  current() = b;
}

template <typename T>
const KernelTable<T>& kernels(Backend b) {
#if defined(VITNERF_HAVE_AVX2)
  if (b == Backend::Avx2) return detail::avx2_table<T>();
#endif
  (void)b;
  return detail::scalar_table<T>();
}

template <typename T>
const KernelTable<T>& kernels() {
  return kernels<T>(current());
}

template const KernelTable<float>& kernels<float>(Backend);
template const KernelTable<double>& kernels<double>(Backend);
template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace vitnerf::simd
