#include "vitnerf/geometry/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::geometry {

std::vector<double> stratified_samples(double t_near, double t_far, int n, bool jitter,
                                       Rng* rng) {
  if (n < 2) throw ArgumentError("stratified_samples: need at least 2 samples, got " +
                                 std::to_string(n));
  if (!(t_near < t_far)) throw ArgumentError("stratified_samples: near must be below far");
  if (jitter && !rng) throw ArgumentError("stratified_samples: jitter needs a generator");
  const double delta = (t_far - t_near) / n;
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = jitter ? rng->uniform() : 0.5;
    t[i] = t_near + (i + u) * delta;
  }
  return t;
}

std::vector<double> importance_resample(std::span<const double> coarse_t,
                                        std::span<const double> weights, double t_near,
                                        double t_far, int n_fine, bool jitter, Rng* rng) {
  if (coarse_t.size() != weights.size())
    throw ArgumentError("importance_resample: " + std::to_string(weights.size()) +
                        " weights for " + std::to_string(coarse_t.size()) + " samples");
  if (coarse_t.empty()) throw ArgumentError("importance_resample: no coarse samples");
  if (jitter && !rng) throw ArgumentError("importance_resample: jitter needs a generator");
  const std::size_t bins = weights.size();
  const double delta = (t_far - t_near) / static_cast<double>(bins);

  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ArgumentError("importance_resample: negative weight");
    total += w;
  }
  std::vector<double> cdf(bins + 1, 0.0);
  const bool uniform = total <= 1e-12;
  for (std::size_t i = 0; i < bins; ++i)
    cdf[i + 1] = cdf[i] + (uniform ? 1.0 / bins : weights[i] / total);
  cdf[bins] = 1.0;

  std::vector<double> out(coarse_t.begin(), coarse_t.end());
  out.reserve(coarse_t.size() + static_cast<std::size_t>(std::max(n_fine, 0)));
  for (int k = 0; k < n_fine; ++k) {
    const double u = jitter ? rng->uniform() : (k + 0.5) / n_fine;
    // First bin whose upper CDF edge exceeds u, skipping empty bins.
    std::size_t b = static_cast<std::size_t>(
        std::upper_bound(cdf.begin() + 1, cdf.end(), u) - (cdf.begin() + 1));
    if (b >= bins) b = bins - 1;
    while (b + 1 < bins && cdf[b + 1] - cdf[b] <= 0.0) ++b;
    const double width = cdf[b + 1] - cdf[b];
    double frac = width > 0.0 ? (u - cdf[b]) / width : 0.5;
    frac = std::clamp(frac, 0.0, 1.0);
    out.push_back(std::clamp(t_near + (b + frac) * delta, t_near, t_far));
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1]) out[i] = std::nextafter(out[i - 1], t_far + 1.0);
  return out;
}

}  // namespace vitnerf::geometry
