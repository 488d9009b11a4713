#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitnerf/tensor/grad_check.hpp"

namespace vitnerf::training {

struct SuiteResult {
  std::string name;
  GradCheckReport report;
  double tolerance = 0.0;
  double seconds = 0.0;
};

/// Finite-difference checks of every differentiable op, each at float64
/// with relative tolerance 1e-5 on random inputs.
std::vector<SuiteResult> op_gradient_suites(std::uint64_t seed);

/// Composed check: tiny model (D=16, J=2, P=8, 16x16 input, 8x8 hybrid map,
/// 4 coarse + 4 fine samples), coarse + fine L2 loss on `rays` rays, every
/// parameter tensor probed at `samples_per_tensor` elements. Fine depths are
/// drawn once and then held fixed so the loss is smooth in the parameters.
SuiteResult composed_model_gradcheck(std::uint64_t seed, int rays = 2,
                                     std::size_t samples_per_tensor = 32,
                                     double tolerance = 1e-4);

}  // namespace vitnerf::training
