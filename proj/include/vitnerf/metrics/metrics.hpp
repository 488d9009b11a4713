#pragma once

#include <string>
#include <vector>

#include "vitnerf/data/image_io.hpp"

namespace vitnerf::metrics {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) with peak 1; identical images report kPsnrCap.
double psnr(const data::Image& a, const data::Image& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-windowed single-scale SSIM over the positions where the window
/// fits entirely, averaged over channels.
double ssim(const data::Image& a, const data::Image& b, const SsimOptions& options = {});

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(MetricRow row);
  /// One "id psnr ssim" line per view, then a "mean" line.
  std::string to_text() const;
};

}  // namespace vitnerf::metrics
