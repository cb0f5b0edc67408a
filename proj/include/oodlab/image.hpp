#pragma once

#include <filesystem>
#include <vector>

#include "oodlab/errors.hpp"

namespace oodlab {

// Single-channel line image. Intensities live in [0, 1]; 1.0 is white background,
// 0.0 is ink, matching the 8-bit PGM files the toolkit reads and writes.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major, height * width entries

  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  bool same_shape(const GrayImage& o) const { return height == o.height && width == o.width; }
};

GrayImage make_image(int height, int width, double fill = 1.0);

// Binary 8-bit PGM (P5, maxval <= 255). Pixel bytes are scaled by 1/255 on load.
// Throws DataError on unsupported magic numbers or truncated payloads.
GrayImage load_pgm(const std::filesystem::path& path);

// Writes P5 with maxval 255, rounding intensities to the nearest byte.
// load_pgm(save_pgm(img)) round-trips bit-exactly for images already quantized to 8 bits.
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// Bilinear resize with half-pixel sample centers and edge clamping.
// Output intensities stay within [min(input), max(input)].
GrayImage resize_bilinear(const GrayImage& img, int out_height, int out_width);

}  // namespace oodlab
