#include "vitnerf/data/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::data {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Tensor<float> Image::tensor() const {
  return Tensor<float>({3, static_cast<std::size_t>(height), static_cast<std::size_t>(width)}, rgb);
}

Image make_image(int width, int height) {
  if (width <= 0 || height <= 0) throw ArgumentError("image size must be positive");
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.assign(3 * static_cast<std::size_t>(width) * height, 0.0f);
  return img;
}

Image image_from_tensor(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.size(0) != 3)
    throw ShapeError("expected a [3 x H x W] image tensor, got " + shape_str(chw.shape()));
  Image img = make_image(static_cast<int>(chw.size(2)), static_cast<int>(chw.size(1)));
  std::copy(chw.data().begin(), chw.data().end(), img.rgb.begin());
  return img;
}

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw LoadError("cannot open image " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw LoadError(path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw LoadError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw LoadError("libpng initialization failed");
  }
  Image img;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("corrupt PNG data in " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  pixels.resize(static_cast<std::size_t>(width) * height * channels);
  rows.resize(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r)
    rows[r] = pixels.data() + static_cast<std::size_t>(r) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 3 && channels != 4)
    throw LoadError(path.string() + ": unsupported channel count " + std::to_string(channels));
  img = make_image(width, height);
  if (channels == 4) img.alpha.resize(static_cast<std::size_t>(width) * height);
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) img.rgb[c * plane + i] = pixels[i * channels + c] / 255.0f;
    if (channels == 4) img.alpha[i] = pixels[i * channels + 3];
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != 3 * static_cast<std::size_t>(image.width) * image.height)
    throw ArgumentError("write_png: malformed image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw LoadError("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw LoadError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw LoadError("libpng initialization failed");
  }
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  std::vector<unsigned char> pixels(plane * 3);
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) pixels[i * 3 + c] = to_byte(image.rgb[c * plane + i]);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int r = 0; r < image.height; ++r)
    rows[r] = pixels.data() + static_cast<std::size_t>(r) * image.width * 3;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<unsigned char> valid_mask(const Image& image, const std::array<double, 3>& background,
                                      double tolerance) {
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  std::vector<unsigned char> mask(plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (!image.alpha.empty()) {
      mask[i] = image.alpha[i] > 0 ? 1 : 0;
      continue;
    }
    for (int c = 0; c < 3; ++c)
      if (std::abs(image.rgb[c * plane + i] - background[c]) > tolerance) mask[i] = 1;
  }
  return mask;
}

Image quantize(const Image& image) {
  Image out = image;
  for (auto& v : out.rgb) v = to_byte(v) / 255.0f;
  return out;
}

}  // namespace vitnerf::data
