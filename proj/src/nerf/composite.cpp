#include "vitnerf/nerf/composite.hpp"

#include <cmath>
#include <memory>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::nerf {
namespace {

void check_depths(std::span<const double> t, double t_far) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw ArgumentError("composite: non-finite sample depth");
    if (i > 0 && !(t[i] > t[i - 1]))
      throw ArgumentError("composite: sample depths must be strictly increasing (t[" +
                          std::to_string(i - 1) + "] = " + std::to_string(t[i - 1]) + ", t[" +
                          std::to_string(i) + "] = " + std::to_string(t[i]) + ")");
  }
  if (!t.empty() && t.back() > t_far)
    throw ArgumentError("composite: last sample " + std::to_string(t.back()) +
                        " lies beyond t_far " + std::to_string(t_far));
}

// Weights and transmittances of one ray; returns the residual transmittance.
double accumulate(std::span<const double> t, const double* sigma, std::size_t sigma_stride,
                  double t_far, std::vector<double>& weights, std::vector<double>& trans) {
  const std::size_t n = t.size();
  weights.resize(n);
  trans.resize(n);
  double optical = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = (i + 1 < n ? t[i + 1] : t_far) - t[i];
    const double tau = sigma[i * sigma_stride] * delta;
    trans[i] = std::exp(-optical);
    weights[i] = trans[i] * -std::expm1(-tau);
    optical += tau;
  }
  return std::exp(-optical);
}

}  // namespace

RenderResult composite(std::span<const double> t, std::span<const double> sigma,
                       std::span<const Color> colors, double t_far, const Color& background) {
  if (sigma.size() != t.size() || colors.size() != t.size())
    throw ShapeError("composite: " + std::to_string(t.size()) + " depths, " +
                     std::to_string(sigma.size()) + " densities, " +
                     std::to_string(colors.size()) + " colors");
  check_depths(t, t_far);
  for (double s : sigma)
    if (!(s >= 0.0)) throw ArgumentError("composite: densities must be nonnegative");
  RenderResult r;
  r.t.assign(t.begin(), t.end());
  r.residual = accumulate(t, sigma.data(), 1, t_far, r.weights, r.transmittance);
  for (std::size_t i = 0; i < t.size(); ++i) {
    r.acc_alpha += r.weights[i];
    for (int c = 0; c < 3; ++c) r.color[c] += r.weights[i] * colors[i][c];
  }
  for (int c = 0; c < 3; ++c) r.color[c] += r.residual * background[c];
  return r;
}

template <typename T>
CompositeOutput<T> composite_rays(const Tensor<T>& sigma, const Tensor<T>& color,
                                  std::span<const double> t, std::size_t samples_per_ray,
                                  double t_far, const Color& background) {
  const std::size_t total = t.size();
  if (samples_per_ray == 0 || total % samples_per_ray != 0)
    throw ShapeError("composite_rays: " + std::to_string(total) + " depths do not split into rays of " +
                     std::to_string(samples_per_ray));
  if (sigma.numel() != total || color.rank() != 2 || color.size(0) != total || color.size(1) != 3)
    throw ShapeError("composite_rays: sigma " + shape_str(sigma.shape()) + " and color " +
                     shape_str(color.shape()) + " do not match " + std::to_string(total) +
                     " samples");
  const std::size_t rays = total / samples_per_ray, s = samples_per_ray;
  std::vector<double> sig(total);
  for (std::size_t i = 0; i < total; ++i) sig[i] = static_cast<double>(sigma[i]);

  auto results = std::make_shared<std::vector<RenderResult>>(rays);
  std::vector<T> out(rays * 3);
  for (std::size_t r = 0; r < rays; ++r) {
    const auto tr = t.subspan(r * s, s);
    check_depths(tr, t_far);
    RenderResult& rr = (*results)[r];
    rr.t.assign(tr.begin(), tr.end());
    rr.residual = accumulate(tr, sig.data() + r * s, 1, t_far, rr.weights, rr.transmittance);
    for (std::size_t i = 0; i < s; ++i) {
      rr.acc_alpha += rr.weights[i];
      for (std::size_t c = 0; c < 3; ++c)
        rr.color[c] += rr.weights[i] * static_cast<double>(color[(r * s + i) * 3 + c]);
    }
    for (std::size_t c = 0; c < 3; ++c) {
      rr.color[c] += rr.residual * background[c];
      out[r * 3 + c] = static_cast<T>(rr.color[c]);
    }
  }

  CompositeOutput<T> result;
  result.color = Tensor<T>::make_op(
      {rays, 3}, std::move(out), {sigma, color},
      [results, rays, s, t_far, background](TensorNode<T>& self) {
        auto& ps = self.parents[0];
        auto& pc = self.parents[1];
        T* gs = ps && ps->requires_grad ? ps->grad_buffer().data() : nullptr;
        T* gc = pc && pc->requires_grad ? pc->grad_buffer().data() : nullptr;
        const std::vector<T>& col = pc->data;
        std::vector<double> gdotc(s);
        for (std::size_t r = 0; r < rays; ++r) {
          const RenderResult& rr = (*results)[r];
          const double g[3] = {static_cast<double>(self.grad[r * 3]),
                               static_cast<double>(self.grad[r * 3 + 1]),
                               static_cast<double>(self.grad[r * 3 + 2])};
          for (std::size_t i = 0; i < s; ++i) {
            const std::size_t k = r * s + i;
            gdotc[i] = g[0] * col[k * 3] + g[1] * col[k * 3 + 1] + g[2] * col[k * 3 + 2];
            if (gc)
              for (std::size_t c = 0; c < 3; ++c)
                gc[k * 3 + c] += static_cast<T>(rr.weights[i] * g[c]);
          }
          if (!gs) continue;
          // suffix = sum_{i>k} w_i (g.c_i) + T_{N+1} (g.bg)
          double suffix = rr.residual * (g[0] * background[0] + g[1] * background[1] +
                                         g[2] * background[2]);
          for (std::size_t i = s; i-- > 0;) {
            const double delta = (i + 1 < s ? rr.t[i + 1] : t_far) - rr.t[i];
            const double t_next = i + 1 < s ? rr.transmittance[i + 1] : rr.residual;
            gs[r * s + i] += static_cast<T>(delta * (t_next * gdotc[i] - suffix));
            suffix += rr.weights[i] * gdotc[i];
          }
        }
      });
  result.rays = *results;
  return result;
}

template CompositeOutput<float> composite_rays(const Tensor<float>&, const Tensor<float>&,
                                               std::span<const double>, std::size_t, double,
                                               const Color&);
template CompositeOutput<double> composite_rays(const Tensor<double>&, const Tensor<double>&,
                                                std::span<const double>, std::size_t, double,
                                                const Color&);

}  // namespace vitnerf::nerf
