#include "vitnerf/tensor/parameters.hpp"

#include "vitnerf/core/errors.hpp"

namespace vitnerf {

template <typename T>
Tensor<T> ParameterStore<T>::add(const std::string& name, Tensor<T> value) {
  if (params_.count(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  value.set_requires_grad(true);
  params_.emplace(name, value);
  return value;
}

template <typename T>
const Tensor<T>& ParameterStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::map<std::string, Tensor<T>> ParameterStore<T>::with_prefix(const std::string& prefix) const {
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, t] : params_)
    if (name.compare(0, prefix.size(), prefix) == 0) out.emplace(name, t);
  return out;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& [name, t] : params_) {
    Tensor<T> h = t;
    h.zero_grad();
  }
}

template <typename T>
std::size_t ParameterStore<T>::numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
Tensor<T> truncated_normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.truncated_normal(stddev));
  return Tensor<T>(std::move(shape), std::move(v));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template Tensor<float> uniform_tensor<float>(Shape, double, Rng&);
template Tensor<double> uniform_tensor<double>(Shape, double, Rng&);
template Tensor<float> truncated_normal_tensor<float>(Shape, double, Rng&);
template Tensor<double> truncated_normal_tensor<double>(Shape, double, Rng&);

}  // namespace vitnerf
