#pragma once

#include <optional>
#include <vector>

#include "vitnerf/core/rng.hpp"
#include "vitnerf/geometry/camera.hpp"

namespace vitnerf::training {

struct PixelBox {
  int row0 = 0, col0 = 0;  // inclusive
  int row1 = 0, col1 = 0;  // exclusive
  int area() const { return (row1 - row0) * (col1 - col0); }
  bool contains(const geometry::Pixel& p) const {
    return p.row >= row0 && p.row < row1 && p.col >= col0 && p.col < col1;
  }
};

/// Tight box around the nonzero entries of a row-major mask; empty masks give
/// no box.
std::optional<PixelBox> mask_bounding_box(const std::vector<unsigned char>& mask, int height,
                                          int width);

/// round(bbox_fraction * n_rays) pixels uniform over the mask's bounding box,
/// the rest uniform over the whole image; all uniform when the mask is empty.
std::vector<geometry::Pixel> sample_ray_pixels(const std::vector<unsigned char>& mask, int height,
                                               int width, int n_rays, double bbox_fraction,
                                               Rng& rng);

}  // namespace vitnerf::training
