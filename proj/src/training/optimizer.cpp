#include "vitnerf/training/optimizer.hpp"

#include <cmath>

#include "vitnerf/simd/kernels.hpp"

namespace vitnerf::training {

template <typename T>
void Adam<T>::step(ParameterStore<T>& params,
                   const std::function<double(const std::string&)>& lr_of) {
  ++steps_;
  const auto& k = simd::kernels<T>();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (const auto& [name, tensor] : params.all()) {
    if (!tensor.has_grad()) continue;
    Tensor<T> p = tensor;
    const std::size_t n = p.numel();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != n) m.assign(n, T(0));
    if (v.size() != n) v.assign(n, T(0));
    const simd::AdamStep<T> s{static_cast<T>(lr_of(name)), static_cast<T>(cfg_.beta1),
                              static_cast<T>(cfg_.beta2), static_cast<T>(cfg_.eps),
                              static_cast<T>(bc1), static_cast<T>(bc2)};
    k.adam(p.mutable_data().data(), m.data(), v.data(), p.grad().data(), n, s);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace vitnerf::training
