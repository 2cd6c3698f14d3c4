#include "irisforge/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "irisforge/error.hpp"

namespace irisforge {

float sample_bilinear(const Image& img, double x, double y, float fill) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  auto px = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return fill;
    return img.at(xi, yi);
  };
  // Exact integer positions return the stored pixel unchanged.
  if (ax == 0.0 && ay == 0.0) return static_cast<float>(px(x0, y0));
  const double top = px(x0, y0) * (1.0 - ax) + px(x0 + 1, y0) * ax;
  const double bottom = px(x0, y0 + 1) * (1.0 - ax) + px(x0 + 1, y0 + 1) * ax;
  return static_cast<float>(top * (1.0 - ay) + bottom * ay);
}

float sample_bilinear_clamped(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width - 1.0);
  y = std::clamp(y, 0.0, img.height - 1.0);
  return sample_bilinear(img, x, y, 0.0f);
}

Image load_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw LoadError("cannot read image: " + path.string());
  Image img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) img.at(x, y) = row[x] / 255.0f;
  }
  return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
  cv::Mat m(img.height, img.width, CV_8UC1);
  for (int y = 0; y < img.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.at(x, y), 0.0f, 1.0f);
      row[x] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image: " + path.string());
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (auto& v : out.pixels) v = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  cv::Mat src(img.height, img.width, CV_32FC1, const_cast<float*>(img.pixels.data()));
  cv::Mat dst;
  const int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  cv::GaussianBlur(src, dst, cv::Size(k, k), sigma, sigma, cv::BORDER_REFLECT);
  Image out(img.width, img.height);
  std::copy(dst.ptr<float>(0), dst.ptr<float>(0) + out.pixels.size(), out.pixels.begin());
  return out;
}

Image from_signed(const std::vector<float>& values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw ShapeError("from_signed: size mismatch");
  Image img(width, height);
  for (std::size_t i = 0; i < values.size(); ++i) img.pixels[i] = 0.5f * (values[i] + 1.0f);
  return img;
}

std::vector<float> to_signed(const Image& img) {
  std::vector<float> v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0f * img.pixels[i] - 1.0f;
  return v;
}

double mean_abs_diff(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("mean_abs_diff: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) s += std::abs(a.pixels[i] - b.pixels[i]);
  return a.pixels.empty() ? 0.0 : s / static_cast<double>(a.pixels.size());
}

}  // namespace irisforge
