#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Elements probed per tensor; tensors at or below this size are probed
  /// exhaustively. 0 probes everything.
  std::size_t samples_per_tensor = 32;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  bool passed = true;
  std::size_t checked = 0;
  // Worst element seen, by |analytic - numeric| / max(1, |numeric|).
  std::string worst_name;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

/// Compares reverse-mode gradients of the scalar `loss` against central
/// differences, perturbing the listed leaf tensors in place (and restoring
/// them). `loss` must rebuild its graph from the current parameter values on
/// every call and be deterministic.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& loss,
                           const std::map<std::string, Tensor<T>>& params,
                           const GradCheckOptions& options = {});

}  // namespace vitnerf
