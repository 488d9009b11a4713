#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vitnerf/tensor/parameters.hpp"

namespace vitnerf::training {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with per-parameter learning rates. Parameters without a gradient are
/// left untouched, moments included.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterStore<T>& params, const std::function<double(const std::string&)>& lr_of);

  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }
  const AdamConfig& config() const { return cfg_; }

  std::map<std::string, std::vector<T>>& first_moments() { return m_; }
  std::map<std::string, std::vector<T>>& second_moments() { return v_; }
  const std::map<std::string, std::vector<T>>& first_moments() const { return m_; }
  const std::map<std::string, std::vector<T>>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  long long steps_ = 0;
  std::map<std::string, std::vector<T>> m_;
  std::map<std::string, std::vector<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace vitnerf::training
