#pragma once

#include <span>
#include <vector>

#include "vitnerf/core/rng.hpp"

namespace vitnerf::geometry {

/// N depths, one per equal-width bin of [t_near, t_far]: bin midpoints
/// without jitter, one uniform draw per bin with it. `rng` is only used when
/// jittering.
std::vector<double> stratified_samples(double t_near, double t_far, int n, bool jitter,
                                       Rng* rng = nullptr);

/// Draws `n_fine` depths by inverting the CDF of the piecewise-constant
/// density that puts weights[i] on the i-th equal-width bin of
/// [t_near, t_far], and returns them merged with `coarse_t`, sorted and
/// strictly increasing. Falls back to a uniform density when all weights are
/// <= 1e-12. Without jitter the CDF is probed at (k + 0.5) / n_fine.
std::vector<double> importance_resample(std::span<const double> coarse_t,
                                        std::span<const double> weights, double t_near,
                                        double t_far, int n_fine, bool jitter, Rng* rng = nullptr);

}  // namespace vitnerf::geometry
