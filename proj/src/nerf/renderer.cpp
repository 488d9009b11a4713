#include "vitnerf/nerf/renderer.hpp"

#include <Eigen/Core>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/geometry/sampling.hpp"
#include "vitnerf/nerf/encoding.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::nerf {
namespace {

template <typename T>
RadianceOutput<T> run_network(const ConditionedSamples<T>& in, const ParameterStore<T>& store,
                              const std::string& prefix, const MlpConfig& mlp) {
  return radiance_mlp(in.encoded, in.direction, in.feature, store, prefix, mlp);
}

}  // namespace

void SamplingConfig::validate() const {
  if (n_coarse < 2) throw ArgumentError("need at least 2 coarse samples per ray");
  if (n_fine < 0) throw ArgumentError("fine sample count must be nonnegative");
  if (!(t_near > 0.0 && t_near < t_far)) throw ArgumentError("ray bounds must satisfy 0 < near < far");
}

template <typename T>
ConditionedSamples<T> condition_samples(const std::vector<geometry::Ray>& rays,
                                        std::span<const double> t, std::size_t samples_per_ray,
                                        const geometry::CameraModel& source,
                                        const Tensor<T>& hybrid, int frequencies) {
  const std::size_t n = t.size();
  if (t.size() != rays.size() * samples_per_ray)
    throw ShapeError("condition_samples: " + std::to_string(t.size()) + " depths for " +
                     std::to_string(rays.size()) + " rays of " + std::to_string(samples_per_ray));
  if (hybrid.rank() != 3) throw ShapeError("condition_samples: feature map must be [C x H x W]");
  const double su = static_cast<double>(hybrid.size(2)) / source.width();
  const double sv = static_cast<double>(hybrid.size(1)) / source.height();
  const Eigen::Matrix3d rot_t = source.rotation().transpose();

  std::vector<T> xc(n * 3), dc(n * 3), uv(n * 2);
  std::vector<unsigned char> valid(n);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const Eigen::Vector3d d = rot_t * rays[r].direction;
    for (std::size_t i = 0; i < samples_per_ray; ++i) {
      const std::size_t k = r * samples_per_ray + i;
      const Eigen::Vector3d x = rays[r].origin + t[k] * rays[r].direction;
      const geometry::Projection p = geometry::project(x, source);
      for (int c = 0; c < 3; ++c) {
        xc[k * 3 + c] = static_cast<T>(p.x_cam[c]);
        dc[k * 3 + c] = static_cast<T>(d[c]);
      }
      valid[k] = p.valid ? 1 : 0;
      uv[k * 2] = static_cast<T>(p.valid ? p.uv.x() * su : 0.0);
      uv[k * 2 + 1] = static_cast<T>(p.valid ? p.uv.y() * sv : 0.0);
    }
  }
  ConditionedSamples<T> out;
  out.encoded = gamma(Tensor<T>({n, 3}, std::move(xc)), frequencies);
  out.direction = Tensor<T>({n, 3}, std::move(dc));
  out.feature = bilinear_sample(hybrid, Tensor<T>({n, 2}, std::move(uv)), valid);
  out.valid = std::move(valid);
  return out;
}

template <typename T>
RenderOutput<T> render_rays(const std::vector<geometry::Ray>& rays,
                            const geometry::CameraModel& source, const Tensor<T>& hybrid,
                            const ParameterStore<T>& store, const MlpConfig& mlp,
                            const SamplingConfig& sampling, Rng* rng,
                            const std::vector<std::vector<double>>* fixed_fine_t) {
  sampling.validate();
  if (rays.empty()) throw ArgumentError("render_rays: no rays");
  if (sampling.jitter && !rng) throw ArgumentError("render_rays: jittered sampling needs a generator");
  const std::size_t nc = static_cast<std::size_t>(sampling.n_coarse);
  const std::size_t nf = nc + static_cast<std::size_t>(sampling.n_fine);
  if (fixed_fine_t && fixed_fine_t->size() != rays.size())
    throw ShapeError("render_rays: fixed fine depths for " + std::to_string(fixed_fine_t->size()) +
                     " rays, expected " + std::to_string(rays.size()));

  std::vector<double> tc;
  tc.reserve(rays.size() * nc);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto s = geometry::stratified_samples(sampling.t_near, sampling.t_far, sampling.n_coarse,
                                                sampling.jitter, rng);
    tc.insert(tc.end(), s.begin(), s.end());
  }
  RenderOutput<T> out;
  const auto coarse_in = condition_samples(rays, tc, nc, source, hybrid, mlp.frequencies);
  const auto coarse = run_network(coarse_in, store, "coarse", mlp);
  auto cres = composite_rays(coarse.sigma, coarse.color, tc, nc, sampling.t_far,
                             sampling.background);
  out.coarse_color = cres.color;
  out.coarse = std::move(cres.rays);

  std::vector<double> tf;
  tf.reserve(rays.size() * nf);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    if (fixed_fine_t) {
      const auto& given = (*fixed_fine_t)[r];
      if (given.size() != nf)
        throw ShapeError("render_rays: fixed fine depths of ray " + std::to_string(r) + " have " +
                         std::to_string(given.size()) + " entries, expected " + std::to_string(nf));
      tf.insert(tf.end(), given.begin(), given.end());
      continue;
    }
    const auto merged = geometry::importance_resample(
        std::span<const double>(tc).subspan(r * nc, nc), out.coarse[r].weights, sampling.t_near,
        sampling.t_far, sampling.n_fine, sampling.jitter, rng);
    tf.insert(tf.end(), merged.begin(), merged.end());
  }
  const auto fine_in = condition_samples(rays, tf, nf, source, hybrid, mlp.frequencies);
  const auto fine = run_network(fine_in, store, "fine", mlp);
  auto fres = composite_rays(fine.sigma, fine.color, tf, nf, sampling.t_far, sampling.background);
  out.fine_color = fres.color;
  out.fine = std::move(fres.rays);
  return out;
}

#define VITNERF_INSTANTIATE_RENDERER(T)                                                       \
  template ConditionedSamples<T> condition_samples(const std::vector<geometry::Ray>&,        \
                                                   std::span<const double>, std::size_t,     \
                                                   const geometry::CameraModel&,             \
                                                   const Tensor<T>&, int);                   \
  template RenderOutput<T> render_rays(const std::vector<geometry::Ray>&,                    \
                                       const geometry::CameraModel&, const Tensor<T>&,       \
                                       const ParameterStore<T>&, const MlpConfig&,           \
                                       const SamplingConfig&, Rng*,                          \
                                       const std::vector<std::vector<double>>*);

VITNERF_INSTANTIATE_RENDERER(float)
VITNERF_INSTANTIATE_RENDERER(double)

}  // namespace vitnerf::nerf
