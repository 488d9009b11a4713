#include "vitnerf/metrics/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::metrics {
namespace {

void check_same(const data::Image& a, const data::Image& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size())
    throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width) + ")");
}

}  // namespace

double psnr(const data::Image& a, const data::Image& b) {
  check_same(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.rgb.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const data::Image& a, const data::Image& b, const SsimOptions& o) {
  check_same(a, b, "ssim");
  if (o.window < 1 || a.width < o.window || a.height < o.window)
    throw ArgumentError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                        " is smaller than the " + std::to_string(o.window) + "x" +
                        std::to_string(o.window) + " window");
  const int w = o.window, half = w / 2;
  std::vector<double> g(static_cast<std::size_t>(w));
  double gs = 0.0;
  for (int i = 0; i < w; ++i) {
    const double x = i - half;
    g[i] = std::exp(-x * x / (2.0 * o.sigma * o.sigma));
    gs += g[i];
  }
  for (auto& v : g) v /= gs;
  const double c1 = (o.k1) * (o.k1), c2 = (o.k2) * (o.k2);
  const int oh = a.height - w + 1, ow = a.width - w + 1;
  const std::size_t plane = static_cast<std::size_t>(a.width) * a.height;

  // Separable filtering of x, y, x^2, y^2, xy: rows first, then columns.
  double total = 0.0;
  std::vector<double> rows(5 * static_cast<std::size_t>(a.height) * ow);
  for (int c = 0; c < 3; ++c) {
    const float* pa = a.rgb.data() + c * plane;
    const float* pb = b.rgb.data() + c * plane;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < ow; ++x) {
        double s[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < w; ++k) {
          const std::size_t idx = static_cast<std::size_t>(y) * a.width + x + k;
          const double va = pa[idx], vb = pb[idx];
          s[0] += g[k] * va;
          s[1] += g[k] * vb;
          s[2] += g[k] * va * va;
          s[3] += g[k] * vb * vb;
          s[4] += g[k] * va * vb;
        }
        for (int m = 0; m < 5; ++m)
          rows[(static_cast<std::size_t>(m) * a.height + y) * ow + x] = s[m];
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < w; ++k)
          for (int m = 0; m < 5; ++m)
            s[m] += g[k] * rows[(static_cast<std::size_t>(m) * a.height + y + k) * ow + x];
        const double mu_a = s[0], mu_b = s[1];
        const double var_a = s[2] - mu_a * mu_a, var_b = s[3] - mu_b * mu_b;
        const double cov = s[4] - mu_a * mu_b;
        total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      }
  }
  return total / (3.0 * oh * ow);
}

void MetricReport::add(MetricRow row) {
  rows.push_back(std::move(row));
  double sp = 0.0, ss = 0.0;
  for (const auto& r : rows) {
    sp += r.psnr;
    ss += r.ssim;
  }
  mean_psnr = sp / rows.size();
  mean_ssim = ss / rows.size();
}

std::string MetricReport::to_text() const {
  std::string out = "id psnr ssim\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s %.6f %.6f\n", r.id.c_str(), r.psnr, r.ssim);
    out += line;
  }
  std::snprintf(line, sizeof line, "mean %.6f %.6f\n", mean_psnr, mean_ssim);
  return out + line;
}

}  // namespace vitnerf::metrics
