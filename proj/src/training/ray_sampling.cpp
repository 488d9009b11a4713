#include "vitnerf/training/ray_sampling.hpp"

#include <algorithm>
#include <cmath>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::training {

std::optional<PixelBox> mask_bounding_box(const std::vector<unsigned char>& mask, int height,
                                          int width) {
  if (mask.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("mask of " + std::to_string(mask.size()) + " entries for a " +
                     std::to_string(height) + "x" + std::to_string(width) + " image");
  PixelBox box{height, width, 0, 0};
  bool any = false;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (mask[static_cast<std::size_t>(r) * width + c]) {
        any = true;
        box.row0 = std::min(box.row0, r);
        box.col0 = std::min(box.col0, c);
        box.row1 = std::max(box.row1, r + 1);
        box.col1 = std::max(box.col1, c + 1);
      }
  if (!any) return std::nullopt;
  return box;
}

std::vector<geometry::Pixel> sample_ray_pixels(const std::vector<unsigned char>& mask, int height,
                                               int width, int n_rays, double bbox_fraction,
                                               Rng& rng) {
  if (n_rays < 1) throw ArgumentError("sample_ray_pixels: need at least one ray");
  if (!(bbox_fraction >= 0.0 && bbox_fraction <= 1.0))
    throw ArgumentError("sample_ray_pixels: bbox fraction must lie in [0, 1]");
  const auto box = mask_bounding_box(mask, height, width);
  const int in_box = box ? static_cast<int>(std::lround(bbox_fraction * n_rays)) : 0;
  std::vector<geometry::Pixel> pixels;
  pixels.reserve(static_cast<std::size_t>(n_rays));
  for (int i = 0; i < in_box; ++i) {
    const int r = box->row0 + static_cast<int>(rng.index(static_cast<std::uint64_t>(box->row1 - box->row0)));
    const int c = box->col0 + static_cast<int>(rng.index(static_cast<std::uint64_t>(box->col1 - box->col0)));
    pixels.push_back({r, c});
  }
  for (int i = in_box; i < n_rays; ++i) {
    const int r = static_cast<int>(rng.index(static_cast<std::uint64_t>(height)));
    const int c = static_cast<int>(rng.index(static_cast<std::uint64_t>(width)));
    pixels.push_back({r, c});
  }
  return pixels;
}

}  // namespace vitnerf::training
