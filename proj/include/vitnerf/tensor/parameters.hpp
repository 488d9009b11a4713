#pragma once

#include <map>
#include <string>

#include "vitnerf/core/rng.hpp"

#include "vitnerf/tensor/ops.hpp"
#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf {

/// Named trainable tensors plus non-trainable batch-norm statistics of one
/// model. Names are dotted paths ("vit.layer3.msa.q_proj.weight") and are
/// unique; iteration is in name order.
template <typename T>
class ParameterStore {
 public:
  /// Registers a leaf and marks it trainable. Duplicate names throw.
  Tensor<T> add(const std::string& name, Tensor<T> value);

  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Tensor<T>>& all() const { return params_; }

  /// Parameters whose name starts with `prefix`.
  std::map<std::string, Tensor<T>> with_prefix(const std::string& prefix) const;

  /// Running statistics, created on first use.
  BatchNormStats<T>& batchnorm(const std::string& name) { return batchnorm_[name]; }
  const std::map<std::string, BatchNormStats<T>>& batchnorm_all() const { return batchnorm_; }
  std::map<std::string, BatchNormStats<T>>& batchnorm_all() { return batchnorm_; }

  void zero_grad();
  std::size_t numel() const;

 private:
  std::map<std::string, Tensor<T>> params_;
  std::map<std::string, BatchNormStats<T>> batchnorm_;
};

/// U(-bound, bound) entries.
template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng);

/// Normal entries truncated at two standard deviations.
template <typename T>
Tensor<T> truncated_normal_tensor(Shape shape, double stddev, Rng& rng);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace vitnerf
