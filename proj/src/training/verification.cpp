#include "vitnerf/training/verification.hpp"

#include <chrono>
#include <functional>
#include <map>

#include "vitnerf/data/orbit.hpp"
#include "vitnerf/encoder/vit.hpp"
#include "vitnerf/model/model.hpp"
#include "vitnerf/nerf/composite.hpp"
#include "vitnerf/nerf/encoding.hpp"
#include "vitnerf/tensor/ops.hpp"
#include "vitnerf/training/loss.hpp"

namespace vitnerf::training {
namespace {

using D = double;
using Params = std::map<std::string, Tensor<D>>;

Tensor<D> random(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<D> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<D>(std::move(shape), std::move(v), true);
}

// Fixed random weights turn any tensor into a scalar with a generic gradient.
Tensor<D> project(const Tensor<D>& x, Rng& rng) {
  std::vector<D> w(x.numel());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return sum(mul(x, Tensor<D>(x.shape(), std::move(w))));
}

SuiteResult timed(const std::string& name, double tol, const std::function<Tensor<D>()>& f,
                  const Params& params, std::uint64_t seed, double step = 1e-6,
                  std::size_t samples = 32) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckOptions o;
  o.step = step;
  o.tolerance = tol;
  o.samples_per_tensor = samples;
  o.seed = seed;
  SuiteResult r{name, grad_check<D>(f, params, o), tol, 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

std::vector<SuiteResult> op_gradient_suites(std::uint64_t seed) {
  std::vector<SuiteResult> out;
  Rng rng(seed);
  const double tol = 1e-5;
  {
    auto a = random({3, 4}, rng), b = random({4, 2}, rng);
    auto w = rng;
    out.push_back(timed("matmul", tol, [=]() mutable { Rng r = w; return project(matmul(a, b), r); },
                        {{"a", a}, {"b", b}}, seed));
  }
  {
    auto x = random({4, 8}, rng), g = random({8}, rng), b = random({8}, rng);
    auto w = rng;
    out.push_back(timed("layernorm", tol,
                        [=]() mutable { Rng r = w; return project(layernorm(x, g, b, 1e-5), r); },
                        {{"x", x}, {"gain", g}, {"bias", b}}, seed));
  }
  {
    auto x = random({3, 5}, rng, -2.0, 2.0);
    auto w = rng;
    out.push_back(timed("gelu/sigmoid/softplus/exp/sin/cos", tol,
                        [=]() mutable {
                          Rng r = w;
                          return add(add(project(gelu(x), r), project(sigmoid(x), r)),
                                     add(add(project(softplus(x), r), project(exp(x), r)),
                                         add(project(sin(x), r), project(cos(x), r))));
                        },
                        {{"x", x}}, seed));
    out.push_back(timed("softmax", tol, [=]() mutable { Rng r = w; return project(softmax(x), r); },
                        {{"x", x}}, seed));
  }
  {
    auto x = random({2, 6, 6}, rng), k3 = random({3, 2, 3, 3}, rng), b3 = random({3}, rng);
    auto w = rng;
    out.push_back(timed("conv2d 3x3 stride 1/2", tol,
                        [=]() mutable {
                          Rng r = w;
                          return add(project(conv2d(x, k3, b3, 1), r),
                                     project(conv2d(x, k3, b3, 2), r));
                        },
                        {{"x", x}, {"weight", k3}, {"bias", b3}}, seed));
    auto k1 = random({3, 2, 1, 1}, rng);
    out.push_back(timed("conv2d 1x1", tol,
                        [=]() mutable { Rng r = w; return project(conv2d(x, k1, b3, 1), r); },
                        {{"x", x}, {"weight", k1}, {"bias", b3}}, seed));
    auto kt = random({2, 3, 2, 2}, rng);
    out.push_back(timed("transposed_conv2d", tol,
                        [=]() mutable {
                          Rng r = w;
                          return project(transposed_conv2d(x, kt, b3, 2), r);
                        },
                        {{"x", x}, {"weight", kt}, {"bias", b3}}, seed));
  }
  {
    auto x = random({3, 4, 5}, rng), g = random({3}, rng), b = random({3}, rng);
    auto w = rng;
    out.push_back(timed("batchnorm2d", tol,
                        [=]() mutable {
                          Rng r = w;
                          BatchNormStats<D> s{std::vector<D>(3, 0.0), std::vector<D>(3, 1.0)};
                          return project(batchnorm2d(x, g, b, s, true, 0.1, 1e-5), r);
                        },
                        {{"x", x}, {"gamma", g}, {"beta", b}}, seed));
  }
  {
    auto map = random({2, 4, 5}, rng);
    std::vector<D> uv;
    for (int i = 0; i < 6; ++i) {
      uv.push_back(rng.uniform(0.6, 4.4));
      uv.push_back(rng.uniform(0.6, 3.4));
    }
    auto uvt = Tensor<D>({6, 2}, uv, true);
    auto w = rng;
    out.push_back(timed("bilinear_sample", tol,
                        [=]() mutable { Rng r = w; return project(bilinear_sample(map, uvt), r); },
                        {{"map", map}, {"uv", uvt}}, seed));
    out.push_back(timed("bilinear_resize", tol,
                        [=]() mutable { Rng r = w; return project(bilinear_resize(map, 7, 3), r); },
                        {{"map", map}}, seed));
  }
  {
    auto p = random({4, 3}, rng, -0.5, 0.5);
    auto w = rng;
    out.push_back(timed("gamma encoding", tol,
                        [=]() mutable { Rng r = w; return project(nerf::gamma(p, 4), r); },
                        {{"p", p}}, seed));
  }
  {
    const std::size_t rays = 3, s = 5;
    auto sigma = random({rays * s, 1}, rng, 0.1, 3.0);
    auto color = random({rays * s, 3}, rng, 0.0, 1.0);
    std::vector<double> t;
    for (std::size_t r = 0; r < rays; ++r) {
      double acc = 2.0;
      for (std::size_t i = 0; i < s; ++i) {
        acc += rng.uniform(0.05, 0.4);
        t.push_back(acc);
      }
    }
    auto w = rng;
    out.push_back(timed("composite", tol,
                        [=]() mutable {
                          Rng r = w;
                          return project(
                              nerf::composite_rays(sigma, color, t, s, 5.0, {0.2, 0.5, 0.9}).color,
                              r);
                        },
                        {{"sigma", sigma}, {"color", color}}, seed));
  }
  {
    ParameterStore<D> store;
    encoder::ViTConfig cfg{4, 1, 8, 2, 2.0, {1}, 2, 2, 1e-6};
    Rng init(seed);
    encoder::init_vit(store, cfg, init);
    auto image = random({3, 8, 8}, rng, 0.0, 1.0);
    image.set_requires_grad(false);
    auto w = rng;
    out.push_back(timed("transformer encoder", 1e-4,
                        [=]() mutable {
                          Rng r = w;
                          return project(encoder::encode(image, store, cfg).taps.at(1), r);
                        },
                        store.all(), seed));
  }
  return out;
}

SuiteResult composed_model_gradcheck(std::uint64_t seed, int rays, std::size_t samples_per_tensor,
                                     double tolerance) {
  model::Model<D> m(model::tiny_model_config(), seed);
  Rng rng(seed + 17);
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  const geometry::CameraModel source({16.0, 16.0, 8.0, 8.0}, pose, 1.0, 3.0, 16, 16);
  const auto target = data::orbit_cameras(source, 8, 2.0, 0.0)[1];
  std::vector<D> px(3 * 16 * 16);
  for (auto& v : px) v = rng.uniform();
  const Tensor<D> image({3, 16, 16}, px);
  std::vector<geometry::Pixel> pixels;
  std::vector<D> truth;
  for (int r = 0; r < rays; ++r) {
    pixels.push_back({static_cast<int>(6 + rng.index(4)), static_cast<int>(6 + rng.index(4))});
    for (int c = 0; c < 3; ++c) truth.push_back(rng.uniform());
  }
  const auto ray_list = geometry::generate_rays(target, pixels);
  const Tensor<D> target_colors({static_cast<std::size_t>(rays), 3}, truth);
  const nerf::Color bg{0.1, 0.2, 0.3};
  const auto sampling = m.sampling(1.0, 3.0, bg, false);

  std::vector<std::vector<double>> fine_t;
  {
    NoGradGuard guard;
    const auto fs = m.features(image, true);
    for (const auto& r : m.render(ray_list, source, fs, sampling, nullptr).fine) fine_t.push_back(r.t);
  }
  auto loss = [&]() {
    const auto fs = m.features(image, true);
    const auto out = m.render(ray_list, source, fs, sampling, nullptr, &fine_t);
    return add(l2_loss(out.coarse_color, target_colors), l2_loss(out.fine_color, target_colors));
  };
  return timed("composed model loss", tolerance, loss, m.params().all(), seed, 1e-6,
               samples_per_tensor);
}

}  // namespace vitnerf::training
