#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf::data {

/// Float RGB image, channels-first, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;            // 3 x height x width
  std::vector<unsigned char> alpha;  // height x width, empty when absent

  float at(int c, int row, int col) const {
    return rgb[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  Tensor<float> tensor() const;
};

Image make_image(int width, int height);
Image image_from_tensor(const Tensor<float>& chw);

/// 8-bit (or 16-bit) PNG in gray, gray+alpha, RGB or RGBA form.
Image read_png(const std::filesystem::path& path);

/// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

/// Alpha > 0 when present, otherwise any channel farther than `tolerance`
/// from the background.
std::vector<unsigned char> valid_mask(const Image& image, const std::array<double, 3>& background,
                                      double tolerance = 2.0 / 255.0);

/// Round trip through 8-bit storage.
Image quantize(const Image& image);

}  // namespace vitnerf::data
