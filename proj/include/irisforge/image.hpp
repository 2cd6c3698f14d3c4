#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace irisforge {

// Single-channel image, row-major, intensities nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
  }
  bool empty() const { return pixels.empty(); }
};

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

// Bilinear sample at (x, y) in pixel-center coordinates; `fill` outside.
float sample_bilinear(const Image& img, double x, double y, float fill = 0.0f);

// Clamp-to-edge variant used by filters and the segmenter.
float sample_bilinear_clamped(const Image& img, double x, double y);

Image load_png(const std::filesystem::path& path);
// Writes 8-bit grayscale; values are clamped to [0,1] and rounded.
void save_png(const Image& img, const std::filesystem::path& path);

// Values quantized exactly as save_png would store them.
Image quantize_8bit(const Image& img);

Image gaussian_blur(const Image& img, double sigma);

// Maps generator output in [-1,1] to [0,1] and back.
Image from_signed(const std::vector<float>& values, int width, int height);
std::vector<float> to_signed(const Image& img);

double mean_abs_diff(const Image& a, const Image& b);

}  // namespace irisforge
