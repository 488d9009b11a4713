#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/data/manifest.hpp"
#include "vitnerf/data/synthetic.hpp"
#include "vitnerf/geometry/sampling.hpp"
#include "vitnerf/metrics/metrics.hpp"
#include "vitnerf/model/model.hpp"
#include "vitnerf/nerf/composite.hpp"
#include "vitnerf/simd/kernels.hpp"
#include "vitnerf/training/ray_sampling.hpp"
#include "vitnerf/training/schedule.hpp"
#include "vitnerf/training/trainer.hpp"
#include "vitnerf/training/verification.hpp"

namespace fs = std::filesystem;
using namespace vitnerf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void progress(const std::string& what) {
  std::fprintf(stderr, "[acceptance] %s\n", what.c_str());
  std::fflush(stderr);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void gradient_suite() {
  const auto start = Clock::now();
  const auto r = training::composed_model_gradcheck(1, 2, 32, 1e-4);
  const double secs = seconds_since(start);
  model::Model<double> m(model::tiny_model_config(), 1);
  std::size_t expected = 0;
  for (const auto& [name, t] : m.params().all()) expected += std::min<std::size_t>(32, t.numel());
  const bool ok = r.report.passed && r.report.checked >= expected && secs < 60.0;
  report(1, ok,
         "probes " + std::to_string(r.report.checked) + " (need " + std::to_string(expected) +
             fmt("), worst error %.3g at ", r.report.error) + r.report.worst_name +
             fmt(", %.1f s", secs));
}

double constant_density_error(int n) {
  const auto t = geometry::stratified_samples(0.0, 1.0, n, false);
  const std::vector<double> sigma(t.size(), 1.0);
  const std::vector<nerf::Color> colors(t.size(), {1.0, 0.0, 0.0});
  const auto r = nerf::composite(t, sigma, colors, 1.0, {0.0, 0.0, 0.0});
  return std::abs(r.color[0] - (1.0 - std::exp(-1.0)));
}

void quadrature_oracle() {
  const double e16 = constant_density_error(16), e64 = constant_density_error(64),
               e256 = constant_density_error(256);
  report(2, e256 <= 5e-3 && e64 < e16 && e256 < e64,
         fmt("error N=16 %.3e, N=64 %.3e, N=256 %.3e", e16, e64, e256));
}

struct Ray {
  std::vector<double> t, sigma;
  std::vector<nerf::Color> colors;
};

Ray random_ray(Rng& rng) {
  const int n = 2 + static_cast<int>(rng.index(63));
  Ray r;
  double t = rng.uniform(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    t += rng.uniform(0.01, 0.2);
    r.t.push_back(t);
    r.sigma.push_back(rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 20.0));
    r.colors.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  return r;
}

void compositing_identities() {
  Rng rng(2024);
  int sum_bad = 0, monotone_bad = 0, insert_bad = 0;
  double worst_sum = 0.0, worst_insert = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Ray ray = random_ray(rng);
    const double t_far = ray.t.back() + rng.uniform(0.0, 0.3);
    const nerf::Color bg{rng.uniform(), rng.uniform(), rng.uniform()};
    const auto base = nerf::composite(ray.t, ray.sigma, ray.colors, t_far, bg);

    double s = base.residual;
    for (double w : base.weights) s += w;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    if (std::abs(s - 1.0) > 1e-6) ++sum_bad;
    for (std::size_t i = 1; i < base.transmittance.size(); ++i)
      if (base.transmittance[i] > base.transmittance[i - 1]) ++monotone_bad;

    // A zero-density sample placed where the ray is already empty: before the
    // first sample, or inside an interval whose left sample has no density.
    std::vector<std::size_t> slots{0};
    for (std::size_t i = 0; i + 1 < ray.t.size(); ++i)
      if (ray.sigma[i] == 0.0) slots.push_back(i + 1);
    const std::size_t at = slots[rng.index(slots.size())];
    const double lo = at == 0 ? ray.t[0] - 0.5 : ray.t[at - 1];
    const double t_new = lo + (ray.t[at] - lo) * rng.uniform(0.1, 0.9);
    Ray ins = ray;
    ins.t.insert(ins.t.begin() + static_cast<std::ptrdiff_t>(at), t_new);
    ins.sigma.insert(ins.sigma.begin() + static_cast<std::ptrdiff_t>(at), 0.0);
    ins.colors.insert(ins.colors.begin() + static_cast<std::ptrdiff_t>(at),
                      nerf::Color{rng.uniform(), rng.uniform(), rng.uniform()});
    const auto after = nerf::composite(ins.t, ins.sigma, ins.colors, t_far, bg);
    double d = std::abs(after.residual - base.residual);
    for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(after.color[c] - base.color[c]));
    worst_insert = std::max(worst_insert, d);
    if (d > 1e-6) ++insert_bad;
  }
  report(3, sum_bad == 0 && monotone_bad == 0 && insert_bad == 0,
         "1000 rays: sum violations " + std::to_string(sum_bad) + fmt(" (worst %.2e)", worst_sum) +
             ", T increases " + std::to_string(monotone_bad) + ", insertion changes " +
             std::to_string(insert_bad) + fmt(" (worst %.2e)", worst_insert));
}

void shape_law() {
  auto cfg = model::toy_model_config();
  model::Model<float> m(cfg, 3);
  const std::vector<double> scales{4.0, 2.0, 1.0, 0.5};
  const std::size_t c = static_cast<std::size_t>(cfg.features.global_dim + cfg.features.local_dim);
  bool ok = true;
  std::string detail;
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{32, 32}, {64, 64}, {64, 96}}) {
    Rng rng(h * 1000 + w);
    std::vector<float> pixels(3 * h * w);
    for (auto& p : pixels) p = static_cast<float>(rng.uniform());
    const auto fs = m.features(Tensor<float>({3, h, w}, pixels), false);
    ok &= fs.hybrid.shape() == Shape{c, h / 2, w / 2};
    ok &= fs.global_levels.size() == scales.size();
    std::size_t rank = 0;
    for (const auto& [layer, level] : fs.global_levels) {
      if (rank >= scales.size()) break;
      ok &= level.size(1) == static_cast<std::size_t>(static_cast<double>(h / 8) * scales[rank]);
      ok &= level.size(2) == static_cast<std::size_t>(static_cast<double>(w / 8) * scales[rank]);
      ++rank;
    }
    detail += (detail.empty() ? "" : ", ") + std::to_string(h) + "x" + std::to_string(w) + " -> " +
              shape_str(fs.hybrid.shape());
  }
  report(4, ok, detail);
}

void ray_sampling() {
  const int h = 64, w = 64;
  std::vector<unsigned char> mask(h * w, 0);
  for (int r = 16; r < 48; ++r)
    for (int col = 16; col < 48; ++col) mask[r * w + col] = 1;
  const training::PixelBox box{16, 16, 48, 48};
  Rng rng(5);
  int inside = 0, total = 0;
  for (int call = 0; call < 100; ++call)
    for (const auto& p : training::sample_ray_pixels(mask, h, w, 100, 0.8, rng)) {
      inside += box.contains(p);
      ++total;
    }
  const double frac = static_cast<double>(inside) / total;
  report(5, total == 10000 && frac >= 0.80 && frac <= 0.86,
         fmt("in-box fraction %.4f over ", frac) + std::to_string(total) + " draws");
}

void lr_schedule() {
  const training::ScheduleConfig cfg{10000, 450000, 0.1};
  const double a = training::lr_at_step(0, 1e-4, cfg), b = training::lr_at_step(10000, 1e-4, cfg),
               c = training::lr_at_step(450000, 1e-4, cfg),
               d = training::lr_at_step(450001, 1e-4, cfg);
  report(6, a == 0.0 && b == 1e-4 && c == 1e-4 && d == 1e-5,
         fmt("lr(0)=%.17g lr(10k)=%.17g lr(450k)=%.17g lr(450k+1)=%.17g", a, b, c, d));
}

data::Image filled(int w, int h, float v) {
  data::Image img = data::make_image(w, h);
  std::fill(img.rgb.begin(), img.rgb.end(), v);
  return img;
}

void metric_oracles() {
  Rng rng(9);
  data::Image a = data::make_image(16, 16);
  for (auto& v : a.rgb) v = static_cast<float>(rng.uniform(0.0, 0.8));
  data::Image b = a;
  for (auto& v : b.rgb) v += 0.1f;
  double se = 0.0;
  for (std::size_t k = 0; k < a.rgb.size(); ++k) se += std::pow(double(b.rgb[k]) - double(a.rgb[k]), 2);
  const double psnr_offset = 10.0 * std::log10(static_cast<double>(a.rgb.size()) / se);
  const double x = 0.25f, y = 0.75f, c1 = 1e-4;
  const double ssim_const = (2 * x * y + c1) / (x * x + y * y + c1);
  std::vector<double> errs{
      std::abs(metrics::psnr(a, a) - 100.0),
      std::abs(metrics::psnr(a, b) - psnr_offset),
      std::abs(metrics::psnr(a, b) - 20.0) > 1e-4 ? 1.0 : 0.0,
      std::abs(metrics::psnr(filled(8, 8, 0.0f), filled(8, 8, 1.0f)) - 0.0),
      std::abs(metrics::ssim(a, a) - 1.0),
      std::abs(metrics::ssim(filled(12, 12, 0.25f), filled(12, 12, 0.75f)) - ssim_const),
  };
  const double worst = *std::max_element(errs.begin(), errs.end());
  report(9, worst <= 1e-6, fmt("worst deviation %.2e over 6 closed-form cases", worst));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct RunResult {
  double train_psnr = 0.0, train_min = 0.0;
  double held_psnr = 0.0, held_min = 0.0, held_ssim = 0.0;
  double seconds = 0.0;
  std::string log;
  fs::path checkpoint;
};

RunResult train_and_evaluate(const data::Scene& scene, const fs::path& dir, std::uint64_t seed,
                             bool use_local, bool evaluate) {
  fs::create_directories(dir);
  auto model_cfg = model::toy_model_config();
  model_cfg.features.use_local = use_local;
  training::TrainConfig cfg;
  cfg.seed = seed;
  const auto start = Clock::now();
  training::Trainer<float> trainer(model_cfg, cfg, training::training_data(scene));
  std::ostringstream log;
  RunResult r;
  r.checkpoint = dir / "checkpoint.bin";
  trainer.run(&log, r.checkpoint);
  r.log = log.str();
  std::ofstream(dir / "loss.log") << r.log;
  if (evaluate) {
    metrics::MetricReport train, held;
    for (std::size_t i = 0; i < scene.views.size(); ++i) {
      const auto& v = scene.views[i];
      const auto pred = trainer.render_view(v.camera);
      const metrics::MetricRow row{v.id, metrics::psnr(pred, v.image), metrics::ssim(pred, v.image)};
      if (v.split == "train") train.add(row);
      if (v.split == "test") held.add(row);
    }
    r.train_psnr = train.mean_psnr;
    r.held_psnr = held.mean_psnr;
    r.held_ssim = held.mean_ssim;
    r.train_min = r.held_min = 1e9;
    for (const auto& row : train.rows) r.train_min = std::min(r.train_min, row.psnr);
    for (const auto& row : held.rows) r.held_min = std::min(r.held_min, row.psnr);
    std::ofstream(dir / "train_metrics.txt") << train.to_text();
    std::ofstream(dir / "held_metrics.txt") << held.to_text();
  }
  r.seconds = seconds_since(start);
  if (evaluate)
    progress(dir.filename().string() + fmt(": train %.2f dB, held-out %.2f dB / SSIM %.4f, %.0f s",
                                           r.train_psnr, r.held_psnr, r.held_ssim, r.seconds));
  else
    progress(dir.filename().string() + fmt(": %.0f s", r.seconds));
  return r;
}

void training_experiments(const fs::path& work) {
  const auto setup = data::default_synthetic_setup();
  const auto manifest = data::write_synthetic_scene(work / "scene", setup);
  const auto scene = data::load_scene(manifest);
  int n_train = 0, n_test = 0;
  for (const auto& v : scene.views) {
    n_train += v.split == "train";
    n_test += v.split == "test";
  }
  progress("scene: " + std::to_string(n_train) + " training views, " + std::to_string(n_test) +
           " held-out views");

  std::vector<RunResult> hybrid, vit_only;
  for (std::uint64_t seed : {1, 2, 3}) {
    progress("training hybrid model, seed " + std::to_string(seed));
    hybrid.push_back(train_and_evaluate(scene, work / ("hybrid_seed" + std::to_string(seed)), seed, true, true));
    progress("training ViT-only model, seed " + std::to_string(seed));
    vit_only.push_back(train_and_evaluate(scene, work / ("vit_only_seed" + std::to_string(seed)), seed, false, true));
  }

  const auto& h1 = hybrid[0];
  report(7, n_train == 8 && n_test == 4 && h1.train_psnr >= 30.0 && h1.held_psnr >= 22.0 && h1.held_ssim >= 0.80,
         fmt("train PSNR %.2f dB (min %.2f), held-out PSNR %.2f dB (min %.2f), ", h1.train_psnr, h1.train_min,
             h1.held_psnr, h1.held_min) +
             fmt("held-out SSIM %.4f, %.0f s", h1.held_ssim, h1.seconds));

  bool within = true;
  int greater = 0;
  std::string detail;
  for (std::size_t i = 0; i < 3; ++i) {
    within &= hybrid[i].held_psnr >= vit_only[i].held_psnr - 0.5;
    greater += hybrid[i].held_psnr > vit_only[i].held_psnr;
    detail += (i ? "; " : "") + fmt("seed %.0f hybrid %.2f vs ViT-only %.2f", double(i + 1),
                                    hybrid[i].held_psnr, vit_only[i].held_psnr);
  }
  report(8, within && greater >= 2, detail + ", hybrid ahead in " + std::to_string(greater) + "/3");
  metric_oracles();

  progress("repeating hybrid seed 1");
  const auto again = train_and_evaluate(scene, work / "hybrid_seed1_repeat", 1, true, false);
  const bool same_ckpt = slurp(h1.checkpoint) == slurp(again.checkpoint);
  const bool same_log = h1.log == again.log && !h1.log.empty();
  report(10, same_ckpt && same_log,
         std::string("checkpoint ") + (same_ckpt ? "identical" : "differs") + " (" +
             std::to_string(fs::file_size(h1.checkpoint)) + " bytes), loss log " +
             (same_log ? "identical" : "differs"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "vitnerf_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  std::printf("SIMD backend: %s\n", std::string(simd::backend_name(simd::active_backend())).c_str());
  gradient_suite();
  quadrature_oracle();
  compositing_identities();
  shape_law();
  ray_sampling();
  lr_schedule();
  training_experiments(work);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
