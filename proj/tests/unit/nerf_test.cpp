#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/data/orbit.hpp"
#include "vitnerf/geometry/sampling.hpp"
#include "vitnerf/nerf/composite.hpp"
#include "vitnerf/nerf/encoding.hpp"
#include "vitnerf/nerf/radiance_mlp.hpp"
#include "vitnerf/nerf/renderer.hpp"
#include "vitnerf/tensor/grad_check.hpp"
#include "vitnerf/tensor/ops.hpp"

namespace vitnerf::nerf {
namespace {

using TD = Tensor<double>;

TD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TD(std::move(shape), std::move(v));
}

void fill(ParameterStore<double>& store, const std::string& prefix, double value) {
  for (auto& [name, p] : store.with_prefix(prefix)) {
    Tensor<double> t = p;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), value);
  }
}

void set(ParameterStore<double>& store, const std::string& name, std::size_t i, double value) {
  Tensor<double> t = store.get(name);
  t.mutable_data()[i] = value;
}

TEST(Gamma, ZeroInput) {
  const auto g = gamma(std::vector<double>{0.0}, 10);
  ASSERT_EQ(g.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(g[i], i % 2 == 0 ? 0.0 : 1.0);
}

TEST(Gamma, ExactValuesAtHalf) {
  const auto g = gamma(std::vector<double>{0.5}, 2);
  const std::vector<double> want{1, 0, 0, -1};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], want[i], 1e-15);
}

TEST(Gamma, VectorLengthAndTensorForm) {
  const std::vector<double> p{0.1, -0.7, 2.3};
  const auto g = gamma(p, 10);
  EXPECT_EQ(g.size(), 60u);
  const TD gt = gamma(TD({1, 3}, p), 10);
  ASSERT_EQ(gt.shape(), (Shape{1, 60}));
  for (std::size_t i = 0; i < 60; ++i) EXPECT_DOUBLE_EQ(gt[i], g[i]);
}

class RadianceMlpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = {2, 8, 2};
    init_radiance_mlp(store_, "net", cfg_, 4, rng_);
  }
  RadianceOutput<double> run(const TD& feat) {
    return radiance_mlp(enc_, dir_, feat, store_, "net", cfg_);
  }
  Rng rng_{31};
  MlpConfig cfg_;
  ParameterStore<double> store_;
  TD enc_ = random_tensor({5, 12}, rng_);
  TD dir_ = random_tensor({5, 3}, rng_);
};

TEST_F(RadianceMlpTest, SigmaHeadAtZeroIsLogTwo) {
  fill(store_, "net.sigma_head", 0.0);
  const auto out = run(random_tensor({5, 4}, rng_));
  for (double s : out.sigma.data()) EXPECT_NEAR(s, std::log(2.0), 1e-15);
}

TEST_F(RadianceMlpTest, OutputRanges) {
  for (double scale : {1.0, 100.0, 1e4}) {
    const auto out = run(random_tensor({5, 4}, rng_, -scale, scale));
    for (double s : out.sigma.data()) EXPECT_GE(s, 0.0);
    for (double c : out.color.data()) {
      EXPECT_GE(c, 0.0);
      EXPECT_LE(c, 1.0);
    }
  }
}

TEST_F(RadianceMlpTest, FeatureConditioningChangesOutput) {
  const TD feat = random_tensor({5, 4}, rng_);
  TD bumped = feat.detach();
  bumped.mutable_data()[2] += 0.1;
  const auto a = run(feat), b = run(bumped);
  double diff = std::abs(a.sigma[0] - b.sigma[0]);
  for (std::size_t c = 0; c < 3; ++c) diff += std::abs(a.color[c] - b.color[c]);
  EXPECT_GT(diff, 1e-8);
}

TEST(RadianceMlp, FullScaleInputWidth) {
  EXPECT_EQ(MlpConfig{}.input_dim(512), 575);
  MlpConfig full{10, 512, 6};
  EXPECT_EQ(full.input_dim(512), 575);
}

std::vector<Color> constant_colors(std::size_t n, Color c) { return std::vector<Color>(n, c); }

TEST(Composite, EmptySpaceReturnsBackground) {
  const auto t = geometry::stratified_samples(2.0, 6.0, 16, false);
  const Color bg{0.2, 0.4, 0.6};
  const auto r = composite(t, std::vector<double>(16, 0.0), constant_colors(16, {1, 1, 1}), 6.0, bg);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(r.color[c], bg[c]);
  EXPECT_EQ(r.acc_alpha, 0.0);
  for (double T : r.transmittance) EXPECT_EQ(T, 1.0);
}

TEST(Composite, OpaqueSample) {
  const std::vector<double> t{1.0};
  const auto r = composite(t, std::vector<double>{30.0}, constant_colors(1, {1, 0, 0}), 2.0, {0, 0, 0});
  EXPECT_NEAR(r.color[0], 1.0, 1e-12);
  EXPECT_NEAR(r.weights[0], 1.0, 1e-12);
}

double constant_density_error(int n) {
  const auto t = geometry::stratified_samples(0.0, 1.0, n, false);
  const auto r = composite(t, std::vector<double>(n, 1.0), constant_colors(n, {1, 0, 0}), 1.0, {0, 0, 0});
  return std::abs(r.color[0] - (1.0 - std::exp(-1.0)));
}

TEST(Composite, ConstantDensityConverges) {
  const double e16 = constant_density_error(16), e64 = constant_density_error(64),
               e256 = constant_density_error(256);
  EXPECT_LT(e256, 5e-3);
  EXPECT_LT(e64, e16);
  EXPECT_LT(e256, e64);
}

TEST(Composite, RejectsBadDepths) {
  const std::vector<double> t{1.0, 1.0};
  EXPECT_THROW(composite(t, std::vector<double>(2, 1.0), constant_colors(2, {0, 0, 0}), 2.0, {0, 0, 0}),
               ArgumentError);
  const std::vector<double> late{1.0, 3.0};
  EXPECT_THROW(composite(late, std::vector<double>(2, 1.0), constant_colors(2, {0, 0, 0}), 2.0, {0, 0, 0}),
               ArgumentError);
}

struct RandomRay {
  std::vector<double> t, sigma;
  std::vector<Color> colors;
};

RandomRay random_ray(Rng& rng, int n) {
  RandomRay r;
  r.t = geometry::stratified_samples(2.0, 6.0, n, true, &rng);
  for (int i = 0; i < n; ++i) {
    r.sigma.push_back(rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 20.0));
    r.colors.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  return r;
}

TEST(Composite, WeightsAndResidualSumToOne) {
  Rng rng(32);
  for (int k = 0; k < 1000; ++k) {
    const auto ray = random_ray(rng, 2 + static_cast<int>(rng.index(63)));
    const auto r = composite(ray.t, ray.sigma, ray.colors, 6.0, {0, 0, 0});
    double s = r.residual;
    for (double w : r.weights) {
      EXPECT_GE(w, 0.0);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
    EXPECT_EQ(r.transmittance[0], 1.0);
    for (std::size_t i = 1; i < r.transmittance.size(); ++i) {
      EXPECT_LE(r.transmittance[i], r.transmittance[i - 1]);
      EXPECT_GE(r.transmittance[i], 0.0);
    }
  }
}

TEST(Composite, ZeroDensityInsertionInvariance) {
  Rng rng(33);
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto ray = random_ray(rng, 2 + static_cast<int>(rng.index(32)));
    const Color bg{rng.uniform(), rng.uniform(), rng.uniform()};
    const auto base = composite(ray.t, ray.sigma, ray.colors, 6.0, bg);
    // Sample i stands for [t_i, t_{i+1}), so a zero-density sample may go in
    // front of the first sample or anywhere inside an empty interval.
    std::vector<std::pair<double, double>> empty{{2.0, ray.t.front()}};
    for (std::size_t i = 0; i < ray.t.size(); ++i)
      if (ray.sigma[i] == 0.0) empty.push_back({ray.t[i], i + 1 < ray.t.size() ? ray.t[i + 1] : 6.0});
    const auto [lo, hi] = empty[rng.index(empty.size())];
    const double t_new = rng.uniform(lo, hi);
    if (!(t_new > lo) || !(t_new < hi)) continue;
    RandomRay ext = ray;
    const auto pos = std::upper_bound(ext.t.begin(), ext.t.end(), t_new) - ext.t.begin();
    ext.t.insert(ext.t.begin() + pos, t_new);
    ext.sigma.insert(ext.sigma.begin() + pos, 0.0);
    ext.colors.insert(ext.colors.begin() + pos, {rng.uniform(), rng.uniform(), rng.uniform()});
    const auto r = composite(ext.t, ext.sigma, ext.colors, 6.0, bg);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.color[c], base.color[c], 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 990);
}

TEST(Composite, SplittingAnIntervalIsExact) {
  Rng rng(36);
  for (int k = 0; k < 200; ++k) {
    const auto ray = random_ray(rng, 2 + static_cast<int>(rng.index(32)));
    const auto base = composite(ray.t, ray.sigma, ray.colors, 6.0, {0, 0, 0});
    RandomRay ext = ray;
    const double t_new = rng.uniform(ray.t.front(), 6.0);
    const auto pos = std::upper_bound(ext.t.begin(), ext.t.end(), t_new) - ext.t.begin();
    if (ext.t[pos - 1] == t_new) continue;
    ext.t.insert(ext.t.begin() + pos, t_new);
    ext.sigma.insert(ext.sigma.begin() + pos, ext.sigma[pos - 1]);
    ext.colors.insert(ext.colors.begin() + pos, ext.colors[pos - 1]);
    const auto r = composite(ext.t, ext.sigma, ext.colors, 6.0, {0, 0, 0});
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.color[c], base.color[c], 1e-9);
  }
}

TEST(CompositeRays, MatchesValueFormAndGradients) {
  Rng rng(34);
  const std::size_t rays = 3, s = 6;
  std::vector<double> t;
  for (std::size_t r = 0; r < rays; ++r) {
    const auto tr = geometry::stratified_samples(2.0, 6.0, static_cast<int>(s), true, &rng);
    t.insert(t.end(), tr.begin(), tr.end());
  }
  TD sigma = random_tensor({rays * s, 1}, rng, 0.0, 3.0);
  TD color = random_tensor({rays * s, 3}, rng, 0.0, 1.0);
  sigma.set_requires_grad(true);
  color.set_requires_grad(true);
  const Color bg{0.3, 0.1, 0.9};
  const auto out = composite_rays(sigma, color, t, s, 6.0, bg);
  for (std::size_t r = 0; r < rays; ++r) {
    std::vector<Color> cs(s);
    for (std::size_t i = 0; i < s; ++i)
      for (int c = 0; c < 3; ++c) cs[i][c] = color[(r * s + i) * 3 + c];
    const auto ref = composite(std::span<const double>(t).subspan(r * s, s),
                               std::span<const double>(sigma.data()).subspan(r * s, s), cs, 6.0, bg);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.color[r * 3 + c], ref.color[c], 1e-14);
  }
  const TD w = random_tensor({rays, 3}, rng);
  GradCheckOptions opt;
  opt.step = 1e-6;
  opt.tolerance = 1e-5;
  const auto report = grad_check<double>(
      [&] { return sum(mul(composite_rays(sigma, color, t, s, 6.0, bg).color, w)); },
      {{"sigma", sigma}, {"color", color}}, opt);
  EXPECT_TRUE(report.passed) << report.worst_name << " " << report.error;
}

class RenderRaysTest : public ::testing::Test {
 protected:
  void SetUp() override {
    source_.emplace(geometry::Intrinsics{16, 16, 8, 8}, Eigen::Matrix4d::Identity(), 1.0, 3.0, 16, 16);
    target_.emplace(data::orbit_cameras(*source_, 4, 2.0, 0.0)[1]);
    init_radiance_mlp(store_, "coarse", mlp_, 1, rng_);
    init_radiance_mlp(store_, "fine", mlp_, 1, rng_);
  }
  std::vector<geometry::Ray> center_ray() const {
    const geometry::Pixel p{8, 8};
    return geometry::generate_rays(*target_, std::span<const geometry::Pixel>(&p, 1));
  }
  Rng rng_{35};
  MlpConfig mlp_{1, 2, 1};
  ParameterStore<double> store_;
  std::optional<geometry::CameraModel> source_, target_;
};

TEST_F(RenderRaysTest, ZeroDensityReturnsBackground) {
  for (const char* net : {"coarse", "fine"}) {
    fill(store_, std::string(net) + ".sigma_head", 0.0);
    set(store_, std::string(net) + ".sigma_head.bias", 0, -60.0);
  }
  const TD hybrid = random_tensor({1, 8, 8}, rng_);
  SamplingConfig sc{8, 8, true, {0.25, 0.5, 0.75}, 1.0, 3.0};
  const auto out = render_rays(center_ray(), *source_, hybrid, store_, mlp_, sc, &rng_);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(out.coarse_color[c], sc.background[c], 1e-12);
    EXPECT_NEAR(out.fine_color[c], sc.background[c], 1e-12);
  }
}

TEST_F(RenderRaysTest, OneHotCoarseWeightsConcentrateFineSamples) {
  // Density follows feature channel 0, which is nonzero on a single map column.
  for (const char* net : {"coarse", "fine"}) {
    const std::string pre(net);
    fill(store_, pre, 0.0);
    set(store_, pre + ".linear_in.weight", 9 * 2, 1.0);
    set(store_, pre + ".sigma_head.weight", 0, 2000.0);
    set(store_, pre + ".sigma_head.bias", 0, -1000.0);
  }
  std::vector<double> map(64, 0.0);
  for (int r = 0; r < 8; ++r) map[r * 8 + 5] = 1.0;
  const TD hybrid({1, 8, 8}, map);
  SamplingConfig sc{8, 16, false, {0, 0, 0}, 1.0, 3.0};
  const auto out = render_rays(center_ray(), *source_, hybrid, store_, mlp_, sc, nullptr);
  const auto& w = out.coarse[0].weights;
  const auto k = std::max_element(w.begin(), w.end()) - w.begin();
  ASSERT_GT(w[k], 0.999);
  const double lo = 1.0 + 0.25 * k, hi = lo + 0.25;
  int inside = 0;
  for (double t : out.fine[0].t) inside += (t >= lo && t <= hi);
  EXPECT_EQ(inside, 16 + 1);
}

TEST_F(RenderRaysTest, DoublingCoarseSamplesStaysWithinQuadratureEnvelope) {
  // Constant field: sigma = softplus(bias), color = sigmoid(bias).
  for (const char* net : {"coarse", "fine"}) {
    const std::string pre(net);
    fill(store_, pre, 0.0);
    set(store_, pre + ".sigma_head.bias", 0, std::log(std::expm1(1.0)));
    set(store_, pre + ".color_head.bias", 0, 3.0);
  }
  const TD hybrid = random_tensor({1, 8, 8}, rng_);
  auto render_with = [&](int n) {
    SamplingConfig sc{n, 0, false, {0, 0, 0}, 1.0, 3.0};
    return render_rays(center_ray(), *source_, hybrid, store_, mlp_, sc, nullptr).fine_color[0];
  };
  auto oracle_with = [](int n) {
    const auto t = geometry::stratified_samples(1.0, 3.0, n, false);
    return composite(t, std::vector<double>(n, 1.0), std::vector<Color>(n, {1, 0, 0}), 3.0, {0, 0, 0}).color[0];
  };
  const double c = 1.0 / (1.0 + std::exp(-3.0));
  for (int n : {8, 16, 32}) {
    const double envelope = std::abs(oracle_with(n) - oracle_with(2 * n)) * c;
    EXPECT_LE(std::abs(render_with(n) - render_with(2 * n)), envelope * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_F(RenderRaysTest, FixedFineDepthsAreUsed) {
  const TD hybrid = random_tensor({1, 8, 8}, rng_);
  SamplingConfig sc{4, 4, true, {0, 0, 0}, 1.0, 3.0};
  std::vector<std::vector<double>> fixed{geometry::stratified_samples(1.0, 3.0, 8, false)};
  const auto out = render_rays(center_ray(), *source_, hybrid, store_, mlp_, sc, &rng_, &fixed);
  EXPECT_EQ(out.fine[0].t, fixed[0]);
  fixed[0].pop_back();
  EXPECT_THROW(render_rays(center_ray(), *source_, hybrid, store_, mlp_, sc, &rng_, &fixed), ShapeError);
}

TEST(ConditionSamples, BehindSourceGetsZeroFeature) {
  const geometry::CameraModel source({16, 16, 8, 8}, Eigen::Matrix4d::Identity(), 1.0, 3.0, 16, 16);
  geometry::Ray ray{Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, -1), {0, 0}};
  const std::vector<double> t{0.5, 2.0};
  const TD hybrid = TD::full({2, 8, 8}, 1.0);
  const auto cs = condition_samples<double>({ray}, t, 2, source, hybrid, 1);
  EXPECT_EQ(cs.valid, (std::vector<unsigned char>{1, 0}));
  EXPECT_EQ(cs.feature[0], 1.0);
  EXPECT_EQ(cs.feature[2], 0.0);
  EXPECT_EQ(cs.feature[3], 0.0);
}

}  // namespace
}  // namespace vitnerf::nerf
