#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/core/rng.hpp"
#include "vitnerf/tensor/grad_check.hpp"
#include "vitnerf/tensor/ops.hpp"
#include "vitnerf/tensor/parameters.hpp"

namespace vitnerf {
namespace {

using TD = Tensor<double>;

TD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TD(std::move(shape), std::move(v), true);
}

void expect_values(const TD& t, const std::vector<double>& want, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t[i], want[i], tol) << "index " << i;
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(TD({2, 3}, std::vector<double>(5)), ShapeError);
  TD t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(shape_str(t.shape()), "[2x3]");
}

TEST(Tensor, OpResultsAreNotMutable) {
  TD a({2}, {1.0, 2.0}, true);
  TD b = scale(a, 2.0);
  EXPECT_THROW(b.mutable_data(), std::logic_error);
}

TEST(Matmul, IdentityTimesMatrix) {
  TD a({2, 2}, {1, 0, 0, 1});
  TD b({2, 2}, {3, 4, 5, 6});
  expect_values(matmul(a, b), {3, 4, 5, 6});
}

TEST(Matmul, RowTimesColumn) {
  TD a({1, 2}, {1, 2});
  TD b({2, 1}, {3, 4});
  expect_values(matmul(a, b), {11});
}

TEST(Matmul, MismatchNamesBothShapes) {
  TD a({2, 3}, std::vector<double>(6));
  TD b({2, 3}, std::vector<double>(6));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  Rng rng(3);
  TD a = random_tensor({3, 4}, rng);
  TD b = random_tensor({4, 2}, rng);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p) EXPECT_NEAR(a.grad()[i * 4 + p], b[p * 2] + b[p * 2 + 1], 1e-14);

  a.zero_grad();
  GradCheckOptions opt;
  opt.step = 1e-6;
  opt.tolerance = 1e-6;
  const auto report = grad_check<double>([&] { return sum(matmul(a, b)); }, {{"a", a}, {"b", b}}, opt);
  EXPECT_TRUE(report.passed) << report.worst_name << " " << report.error;
}

TEST(Conv2d, OneByOneScales) {
  Rng rng(1);
  TD x = random_tensor({1, 4, 4}, rng);
  TD w({1, 1, 1, 1}, {2.0});
  TD y = conv2d(x, w, TD(), 1);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 4}));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(y[i], 2.0 * x[i]);
}

TEST(Conv2d, AllOnesCenterAndCorner) {
  TD x = TD::full({1, 5, 5}, 1.0);
  TD w = TD::full({1, 1, 3, 3}, 1.0);
  TD y = conv2d(x, w, TD(), 1);
  // Count of in-bounds taps under same padding.
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const int rows = std::min(r + 1, 4) - std::max(r - 1, 0) + 1;
      const int cols = std::min(c + 1, 4) - std::max(c - 1, 0) + 1;
      EXPECT_DOUBLE_EQ(y[r * 5 + c], rows * cols);
    }
  EXPECT_DOUBLE_EQ(y[12], 9.0);
  EXPECT_DOUBLE_EQ(y[0], 4.0);
}

TEST(Conv2d, StrideTwoHalvesGrid) {
  TD x = TD::zeros({8, 8, 8});
  TD w = TD::zeros({8, 8, 3, 3});
  EXPECT_EQ(conv2d(x, w, TD(), 2).shape(), (Shape{8, 4, 4}));
}

TEST(Conv2d, ChannelMismatch) {
  TD x = TD::zeros({2, 4, 4});
  TD w = TD::zeros({1, 3, 3, 3});
  EXPECT_THROW(conv2d(x, w, TD(), 1), ShapeError);
}

TEST(Conv2d, OneHotKernelSelectsChannel) {
  Rng rng(2);
  TD x = random_tensor({3, 5, 4}, rng);
  TD w({1, 3, 1, 1}, {0.0, 1.0, 0.0});
  TD y = conv2d(x, w, TD(), 1);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(y[i], x[20 + i]);
}

TEST(TransposedConv2d, DisjointTiling) {
  TD x({1, 2, 2}, {1, 2, 3, 4});
  TD w({1, 1, 2, 2}, {1, 10, 100, 1000});
  TD y = transposed_conv2d(x, w, TD(), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 4}));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(y[r * 4 + c], x[(r / 2) * 2 + c / 2] * w[(r % 2) * 2 + c % 2]);
}

TEST(TransposedConv2d, StrideFourQuadruples) {
  TD x = TD::zeros({2, 4, 6});
  TD w = TD::full({2, 3, 4, 4}, 0.5);
  TD y = transposed_conv2d(x, w, TD(), 4);
  EXPECT_EQ(y.shape(), (Shape{3, 16, 24}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(TransposedConv2d, KernelMustEqualStride) {
  TD x = TD::zeros({1, 2, 2});
  TD w = TD::zeros({1, 1, 3, 3});
  EXPECT_THROW(transposed_conv2d(x, w, TD(), 2), UnsupportedConfig);
}

TEST(LayerNorm, ConstantVectorGoesToZero) {
  TD x({1, 4}, {5, 5, 5, 5});
  TD g = TD::full({4}, 1.0), b = TD::zeros({4});
  expect_values(layernorm(x, g, b, 1e-6), {0, 0, 0, 0});
}

TEST(LayerNorm, TwoValues) {
  TD x({1, 2}, {1, -1});
  TD g = TD::full({2}, 1.0), b = TD::zeros({2});
  const double eps = 1e-12;
  const double want = 1.0 / std::sqrt(1.0 + eps);
  expect_values(layernorm(x, g, b, eps), {want, -want});
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  TD x = random_tensor({4, 8}, rng);
  TD g = random_tensor({8}, rng, 0.5, 1.5);
  TD b = random_tensor({8}, rng);
  TD w = random_tensor({4, 8}, rng);
  GradCheckOptions opt;
  opt.step = 1e-6;
  const auto report = grad_check<double>(
      [&] { return sum(mul(layernorm(x, g, b, 1e-5), w)); }, {{"x", x}, {"gain", g}, {"bias", b}},
      opt);
  EXPECT_TRUE(report.passed) << report.worst_name << " " << report.error;
  EXPECT_LT(report.error, 1e-5);
}

TEST(Activations, ReluAndSoftmax) {
  TD x({2}, {-2, 3});
  expect_values(relu(x), {0, 3});
  expect_values(softmax(TD({1, 3}, {0, 0, 0})), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
}

TEST(Activations, GeluMatchesErfForm) {
  TD x({5}, {-2, -1, 0, 1, 2});
  TD y = gelu(x);
  EXPECT_EQ(y[2], 0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    const long double v = x[i];
    const long double ref = v * 0.5L * (1.0L + std::erf(v / std::sqrt(2.0L)));
    EXPECT_NEAR(y[i], static_cast<double>(ref), 1e-6);
  }
}

TEST(Activations, SoftmaxRowsSumToOne) {
  Rng rng(5);
  TD x = random_tensor({6, 9}, rng, -20.0, 20.0);
  TD y = softmax(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_GE(y[r * 9 + c], 0.0);
      s += y[r * 9 + c];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Activations, ValuesStayFinite) {
  TD x({4}, {-800.0, -30.0, 30.0, 800.0});
  for (const TD& y : {sigmoid(x), softplus(x), softmax(reshape(x, {1, 4})), gelu(x)})
    for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(BilinearSample, NodeMidpointAndClamp) {
  TD map({1, 2, 2}, {0, 1, 2, 3});
  TD uv({4, 2}, {0.5, 0.5, 1.0, 0.5, 1.5, 1.5, 100.0, -50.0});
  expect_values(bilinear_sample(map, uv), {0, 0.5, 3, 1});
}

TEST(BilinearSample, InvalidRowsAreZero) {
  TD map({2, 2, 2}, {1, 1, 1, 1, 2, 2, 2, 2});
  TD uv({2, 2}, {1.0, 1.0, -1.0, -1.0});
  const std::vector<unsigned char> valid{1, 0};
  expect_values(bilinear_sample(map, uv, valid), {1, 2, 0, 0});
}

TEST(BilinearResize, SameSizeIsIdentityAndConstantIsExact) {
  Rng rng(6);
  TD m = random_tensor({2, 5, 7}, rng);
  TD same = bilinear_resize(m, 5, 7);
  for (std::size_t i = 0; i < m.numel(); ++i) EXPECT_EQ(same[i], m[i]);
  TD c = TD::full({1, 8, 8}, 0.37);
  TD back = bilinear_resize(bilinear_resize(c, 4, 4), 8, 8);
  for (double v : back.data()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Ops, InputsUnchangedAndRepeatable) {
  Rng rng(7);
  TD x = random_tensor({2, 6, 6}, rng);
  TD w = random_tensor({3, 2, 3, 3}, rng);
  const std::vector<double> before(x.data().begin(), x.data().end());
  TD y1 = conv2d(x, w, TD(), 1);
  TD y2 = conv2d(x, w, TD(), 1);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), x.data().begin()));
  EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

TEST(Gather, ScatterAddsGradient) {
  TD a({3}, {1, 2, 3}, true);
  TD g = gather(a, {4}, {0, 2, 2, 1});
  expect_values(g, {1, 3, 3, 2});
  sum(g).backward();
  EXPECT_EQ(std::vector<double>(a.grad().begin(), a.grad().end()), (std::vector<double>{1, 1, 2}));
}

TEST(GradCheck, SumOfSquares) {
  Rng rng(8);
  TD theta = random_tensor({10}, rng);
  sum(mul(theta, theta)).backward();
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(theta.grad()[i], 2.0 * theta[i], 1e-14);
  theta.zero_grad();
  GradCheckOptions opt;
  opt.step = 1e-5;
  opt.tolerance = 1e-8;
  const auto report = grad_check<double>([&] { return sum(mul(theta, theta)); }, {{"theta", theta}}, opt);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.error, 1e-8);
}

TEST(GradCheck, ConstantLossHasZeroGradient) {
  TD theta({3}, {1, 2, 3}, true);
  TD k = TD::scalar(4.0);
  const auto report = grad_check<double>([&] { return add(k, scale(sum(theta), 0.0)); }, {{"theta", theta}});
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.analytic, 0.0);
  EXPECT_EQ(report.numeric, 0.0);
}

TEST(GradCheck, DetectsWrongGradient) {
  TD theta({2}, {0.3, -0.4}, true);
  auto broken = [&] {
    TD y = sum(mul(theta, theta));
    // Forward value of sum(theta^2) with a backward that reports theta instead of 2 theta.
    return TD::make_op({1}, {y[0]}, {theta}, [t = theta](TensorNode<double>& self) mutable {
      auto& g = t.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * t[i];
    });
  };
  EXPECT_FALSE(grad_check<double>(broken, {{"theta", theta}}).passed);
}

TEST(Parameters, DuplicateNamesRejected) {
  ParameterStore<float> store;
  store.add("a.weight", Tensor<float>::zeros({2}));
  EXPECT_THROW(store.add("a.weight", Tensor<float>::zeros({2})), ArgumentError);
  EXPECT_TRUE(store.get("a.weight").requires_grad());
}

TEST(Parameters, TruncatedNormalStaysWithinTwoSigma) {
  Rng rng(9);
  auto t = truncated_normal_tensor<double>({4000}, 0.02, rng);
  double mean = 0.0;
  for (double v : t.data()) {
    EXPECT_LE(std::abs(v), 0.04);
    mean += v;
  }
  EXPECT_NEAR(mean / 4000.0, 0.0, 0.002);
}

}  // namespace
}  // namespace vitnerf
