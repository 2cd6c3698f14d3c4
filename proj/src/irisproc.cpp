#include "irisforge/irisproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "irisforge/error.hpp"

namespace irisforge {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double circle_mean(const Image& img, double cx, double cy, double r, int samples) {
  double s = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = kTwoPi * k / samples;
    s += sample_bilinear_clamped(img, cx + r * std::cos(t), cy + r * std::sin(t));
  }
  return s / samples;
}

struct BoundaryHit {
  double cx = 0, cy = 0, r = 0, response = -1e9;
};

// Peak over radii of the [1,2,1]-smoothed step C(r + 1) - C(r - 1), minus
// dark_weight times the mean brightness inside the circle.
BoundaryHit best_radius(const Image& img, double cx, double cy, double r_lo, double r_hi, double dr,
                        int samples, double dark_weight) {
  const int n = std::max(1, static_cast<int>(std::floor((r_hi - r_lo) / dr)) + 1);
  std::vector<double> step(n + 2);
  for (int k = -1; k <= n; ++k) {
    const double r = r_lo + k * dr;
    step[k + 1] = circle_mean(img, cx, cy, r + 1.0, samples) - circle_mean(img, cx, cy, std::max(0.0, r - 1.0), samples);
  }
  BoundaryHit best{cx, cy, r_lo, -1e9};
  for (int k = 0; k < n; ++k) {
    double v = 0.25 * step[k] + 0.5 * step[k + 1] + 0.25 * step[k + 2];
    if (dark_weight > 0.0) {
      const double r = r_lo + k * dr;
      const double inside = (circle_mean(img, cx, cy, std::max(0.0, r - 1.5), samples) +
                             circle_mean(img, cx, cy, 0.5 * r, samples / 2) + sample_bilinear_clamped(img, cx, cy)) /
                            3.0;
      v -= dark_weight * inside;
    }
    if (v > best.response) best = {cx, cy, r_lo + k * dr, v};
  }
  return best;
}

BoundaryHit search(const Image& img, double cx0, double cy0, double center_half, double center_step,
                   double r_lo, double r_hi, double dr, int samples, double dark_weight = 0.0) {
  BoundaryHit best;
  const int steps = static_cast<int>(std::round(center_half / center_step));
  for (int iy = -steps; iy <= steps; ++iy)
    for (int ix = -steps; ix <= steps; ++ix) {
      const auto hit = best_radius(img, cx0 + ix * center_step, cy0 + iy * center_step, r_lo, r_hi, dr, samples, dark_weight);
      if (hit.response > best.response) best = hit;
    }
  return best;
}

double band_mean(const Image& img, double cx, double cy, double r_lo, double r_hi, int samples, bool& any) {
  double s = 0.0;
  int n = 0;
  for (double r = r_lo; r <= r_hi + 1e-9; r += 0.5) {
    if (r <= 0.0) continue;
    for (int k = 0; k < samples; ++k) {
      const double t = kTwoPi * k / samples;
      const double x = cx + r * std::cos(t), y = cy + r * std::sin(t);
      if (!img.contains(x, y)) continue;
      s += sample_bilinear(img, x, y);
      ++n;
    }
  }
  any = n > 0;
  return n ? s / n : 0.0;
}

Image laplacian_of_gaussian(const Image& img, double sigma) {
  const Image b = gaussian_blur(img, sigma);
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      auto px = [&](int xx, int yy) {
        return b.at(std::clamp(xx, 0, img.width - 1), std::clamp(yy, 0, img.height - 1));
      };
      out.at(x, y) = px(x - 1, y) + px(x + 1, y) + px(x, y - 1) + px(x, y + 1) - 4.0f * px(x, y);
    }
  return out;
}

// Point at normalized radius rho along angle t between the two boundaries.
void rubber_sheet_point(const Segmentation& seg, double rho, double t, double& x, double& y) {
  const double c = std::cos(t), s = std::sin(t);
  const double px = seg.pupil.cx + seg.pupil.r * c, py = seg.pupil.cy + seg.pupil.r * s;
  const double lx = seg.limbus.cx + seg.limbus.r * c, ly = seg.limbus.cy + seg.limbus.r * s;
  x = (1.0 - rho) * px + rho * lx;
  y = (1.0 - rho) * py + rho * ly;
}

}  // namespace

Segmentation segment_iris(const Image& image, const SegmenterConfig& cfg) {
  Segmentation seg;
  if (image.width < 16 || image.height < 16) return seg;
  const Image img = gaussian_blur(image, 1.0);
  const double side = std::min(image.width, image.height);
  const double cx0 = image.width / 2.0, cy0 = image.height / 2.0;
  const double rp_lo = std::max(2.0, cfg.pupil_min_frac * side);
  const double rp_hi = cfg.pupil_max_frac * side;
  const int n = cfg.circle_samples;

  auto coarse = search(img, cx0, cy0, cfg.center_range_frac * side, 2.0, rp_lo, rp_hi, 1.0, n, cfg.pupil_dark_weight);
  auto fine = search(img, coarse.cx, coarse.cy, 2.0, 0.5, std::max(rp_lo, coarse.r - 2.0),
                     std::min(rp_hi, coarse.r + 2.0), 0.25, n, cfg.pupil_refine_dark_weight);
  fine.response = best_radius(img, fine.cx, fine.cy, fine.r, fine.r, 1.0, n, 0.0).response;
  seg.pupil = {fine.cx, fine.cy, fine.r};
  seg.pupil_response = fine.response;
  if (!(fine.response > cfg.min_response)) return seg;

  const double rl_lo = cfg.limbus_min_ratio * fine.r;
  const double rl_hi = std::min(cfg.limbus_max_ratio * fine.r, 0.6 * side);
  if (!(rl_hi > rl_lo)) return seg;
  auto lc = search(img, fine.cx, fine.cy, 3.0, 1.0, rl_lo, rl_hi, 1.0, n);
  auto lf = search(img, lc.cx, lc.cy, 1.0, 0.5, std::max(rl_lo, lc.r - 2.0), std::min(rl_hi, lc.r + 2.0), 0.25, n);
  seg.limbus = {lf.cx, lf.cy, lf.r};
  seg.limbus_response = lf.response;

  const bool pupil_inside = std::hypot(seg.pupil.cx - seg.limbus.cx, seg.pupil.cy - seg.limbus.cy) + seg.pupil.r <
                            seg.limbus.r;
  const bool centers_inside = image.contains(seg.pupil.cx, seg.pupil.cy) && image.contains(seg.limbus.cx, seg.limbus.cy);
  seg.success = lf.response > cfg.min_response && pupil_inside && centers_inside;
  return seg;
}

PolarStrip normalize_iris(const Image& image, const Segmentation& seg, int rows, int cols) {
  if (!seg.success) throw SegmentationError("cannot normalize: segmentation failed");
  PolarStrip strip;
  strip.rows = rows;
  strip.cols = cols;
  strip.values.assign(static_cast<std::size_t>(rows) * cols, 0.0f);
  strip.mask.assign(static_cast<std::size_t>(rows) * cols, 0);
  for (int i = 0; i < rows; ++i) {
    const double rho = (i + 0.5) / rows;
    for (int j = 0; j < cols; ++j) {
      const double t = kTwoPi * j / cols;
      double x, y;
      rubber_sheet_point(seg, rho, t, x, y);
      const std::size_t k = static_cast<std::size_t>(i) * cols + j;
      if (image.contains(x, y)) {
        strip.values[k] = sample_bilinear(image, x, y);
        strip.mask[k] = 1;
      }
    }
  }
  return strip;
}

double IrisCode::valid_fraction() const {
  if (mask.empty()) return 0.0;
  return static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / mask.size();
}

IrisCode iris_code(const PolarStrip& strip, const GaborConfig& cfg) {
  const int half = static_cast<int>(std::ceil(3.0 * cfg.sigma));
  std::vector<double> re(2 * half + 1), im(2 * half + 1);
  double env_sum = 0.0, re_sum = 0.0;
  for (int t = -half; t <= half; ++t) {
    const double env = std::exp(-0.5 * t * t / (cfg.sigma * cfg.sigma));
    re[t + half] = env * std::cos(kTwoPi * t / cfg.wavelength);
    im[t + half] = env * std::sin(kTwoPi * t / cfg.wavelength);
    env_sum += env;
    re_sum += re[t + half];
  }
  // Zero-DC even part so flat intensity gives no response.
  for (int t = -half; t <= half; ++t)
    re[t + half] -= re_sum * std::exp(-0.5 * t * t / (cfg.sigma * cfg.sigma)) / env_sum;

  IrisCode code;
  code.rows = strip.rows;
  code.cols = strip.cols;
  code.bits.assign(static_cast<std::size_t>(strip.rows) * strip.cols * 2, 0);
  code.mask.assign(static_cast<std::size_t>(strip.rows) * strip.cols, 0);
  std::vector<double> resp(code.bits.size(), 0.0);
  for (int i = 0; i < strip.rows; ++i)
    for (int j = 0; j < strip.cols; ++j) {
      double sr = 0.0, si = 0.0;
      for (int t = -half; t <= half; ++t) {
        const int jj = ((j + t) % strip.cols + strip.cols) % strip.cols;
        const double v = strip.values[static_cast<std::size_t>(i) * strip.cols + jj];
        sr += v * re[t + half];
        si += v * im[t + half];
      }
      const std::size_t k = static_cast<std::size_t>(i) * strip.cols + j;
      code.bits[2 * k] = sr > 0.0;
      code.bits[2 * k + 1] = si > 0.0;
      code.mask[k] = strip.mask[k] && std::hypot(sr, si) > 1e-6;
      resp[2 * k] = sr;
      resp[2 * k + 1] = si;
    }
  // Fragile bits: a part close to zero flips under small resampling changes.
  if (cfg.fragile_fraction > 0.0) {
    double ms = 0.0;
    long n = 0;
    for (std::size_t k = 0; k < code.mask.size(); ++k)
      if (code.mask[k]) ms += resp[2 * k] * resp[2 * k] + resp[2 * k + 1] * resp[2 * k + 1], ++n;
    const double rms = n ? std::sqrt(ms / (2.0 * n)) : 0.0;
    for (std::size_t k = 0; k < code.mask.size(); ++k)
      if (std::min(std::abs(resp[2 * k]), std::abs(resp[2 * k + 1])) < cfg.fragile_fraction * rms) code.mask[k] = 0;
  }
  return code;
}

double hamming_distance(const IrisCode& a, const IrisCode& b, int rotation) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("iris codes differ in geometry");
  long diff = 0, valid = 0;
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) {
      const std::size_t ka = static_cast<std::size_t>(i) * a.cols + j;
      const std::size_t kb = static_cast<std::size_t>(i) * a.cols + ((j + rotation) % a.cols + a.cols) % a.cols;
      if (!a.mask[ka] || !b.mask[kb]) continue;
      ++valid;
      diff += (a.bits[2 * ka] != b.bits[2 * kb]) + (a.bits[2 * ka + 1] != b.bits[2 * kb + 1]);
    }
  if (valid == 0) return -1.0;
  return static_cast<double>(diff) / (2.0 * valid);
}

double match_codes(const IrisCode& a, const IrisCode& b, int max_rotation) {
  double best = 2.0;
  for (int s = -max_rotation; s <= max_rotation; ++s) {
    const double hd = hamming_distance(a, b, s);
    if (hd >= 0.0) best = std::min(best, hd);
  }
  if (best > 1.0) throw NoOverlap("iris codes share no valid cells");
  return 1.0 - best;
}

double polygon_circularity(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 3 || ys.size() != n) return 0.0;
  double area = 0.0, perim = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    area += xs[i] * ys[j] - xs[j] * ys[i];
    perim += std::hypot(xs[j] - xs[i], ys[j] - ys[i]);
  }
  area = std::abs(area) / 2.0;
  return perim > 0.0 ? 4.0 * std::numbers::pi * area / (perim * perim) : 0.0;
}

double log_energy(const Image& image, const Segmentation& seg, double log_sigma) {
  const Image log = laplacian_of_gaussian(image, log_sigma);
  double s = 0.0;
  long n = 0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const double rp = std::hypot(x - seg.pupil.cx, y - seg.pupil.cy);
      const double rl = std::hypot(x - seg.limbus.cx, y - seg.limbus.cy);
      // Stay clear of the boundary edges themselves.
      if (rp < seg.pupil.r + 2.0 || rl > seg.limbus.r - 2.0) continue;
      s += static_cast<double>(log.at(x, y)) * log.at(x, y);
      ++n;
    }
  return n ? s / n : 0.0;
}

double calibrate_sharpness_reference(const std::vector<Image>& clean_images, double log_sigma) {
  std::vector<double> e;
  for (const auto& img : clean_images) {
    const auto seg = segment_iris(img);
    if (seg.success) e.push_back(log_energy(img, seg, log_sigma));
  }
  if (e.empty()) throw InsufficientData("no segmentable calibration images");
  std::sort(e.begin(), e.end());
  return e.size() % 2 ? e[e.size() / 2] : 0.5 * (e[e.size() / 2 - 1] + e[e.size() / 2]);
}

QualityReport quality_components(const Image& image, const Segmentation& seg, const QualityConfig& cfg) {
  if (!seg.success) throw SegmentationError("quality needs a successful segmentation");
  QualityReport q;

  // Usable area: fraction of the annulus that lies inside the image.
  {
    long inside = 0, total = 0;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 128; ++j) {
        double x, y;
        rubber_sheet_point(seg, (i + 0.5) / 16.0, kTwoPi * j / 128.0, x, y);
        inside += image.contains(x, y);
        ++total;
      }
    q.usable_area = 100.0 * inside / total;
  }

  auto contrast = [&](const Circle& c, double in_lo, double in_hi, double out_lo, double out_hi) {
    bool a = false, b = false;
    const double mi = band_mean(image, c.cx, c.cy, in_lo, in_hi, 64, a);
    const double mo = band_mean(image, c.cx, c.cy, out_lo, out_hi, 64, b);
    if (!a || !b) return 0.0;
    return std::clamp(100.0 * std::abs(mo - mi) / (mo + mi + cfg.contrast_delta), 0.0, 100.0);
  };
  const auto& L = seg.limbus;
  const auto& P = seg.pupil;
  q.sclera_contrast = contrast(L, L.r - 3.0, L.r - 1.5, L.r + 1.5, L.r + 3.0);
  q.pupil_contrast = contrast(P, std::max(0.5, P.r - 3.0), P.r - 1.5, P.r + 1.5, P.r + 3.0);

  const double e = log_energy(image, seg, cfg.log_sigma);
  q.sharpness = 100.0 * std::min(1.0, e / cfg.sharpness_reference);

  // Pupil boundary traced ray by ray: crossing of the level halfway between
  // the pupil mean and the iris just outside the boundary on that ray.
  {
    bool a = false;
    const double mp = band_mean(image, P.cx, P.cy, std::max(0.5, P.r - 3.0), P.r - 1.5, 64, a);
    const int rays = 32;
    std::vector<double> xs, ys;
    for (int k = 0; k < rays; ++k) {
      const double t = kTwoPi * k / rays;
      const double c = std::cos(t), s = std::sin(t);
      auto at = [&](double r) { return sample_bilinear_clamped(image, P.cx + r * c, P.cy + r * s); };
      const double outside = at(P.r + 2.0);
      const double dir = outside >= mp ? 1.0 : -1.0;
      const double level = 0.5 * (mp + outside);
      double edge = P.r;
      const double r0 = std::max(0.25, P.r - 2.0);
      double prev_r = r0;
      double prev_v = dir * (at(r0) - level);
      for (double r = r0 + 0.25; r <= P.r + 2.0 + 1e-9; r += 0.25) {
        const double v = dir * (at(r) - level);
        if (prev_v < 0.0 && v >= 0.0) {
          edge = prev_r + 0.25 * (-prev_v) / (v - prev_v);
          break;
        }
        prev_r = r;
        prev_v = v;
      }
      xs.push_back(P.cx + edge * c);
      ys.push_back(P.cy + edge * s);
    }
    q.circularity = 100.0 * std::min(1.0, polygon_circularity(xs, ys));
  }
  q.overall = kQualityFailure;
  return q;
}

int combine_quality(const QualityReport& c) {
  const double parts[] = {c.usable_area, c.sclera_contrast, c.pupil_contrast, c.sharpness, c.circularity};
  double log_sum = 0.0;
  for (double p : parts) {
    if (!(p > 0.0)) return 0;
    log_sum += std::log(std::min(p, 100.0) / 100.0);
  }
  return static_cast<int>(std::clamp(std::lround(100.0 * std::exp(log_sum / 5.0)), 0L, 100L));
}

QualityReport assess_quality(const Image& image, const QualityConfig& cfg) {
  const auto seg = segment_iris(image);
  if (!seg.success) return QualityReport{};
  QualityReport q = quality_components(image, seg, cfg);
  q.overall = combine_quality(q);
  return q;
}

int overall_quality(const Image& image, const QualityConfig& cfg) { return assess_quality(image, cfg).overall; }

std::optional<IrisTemplate> extract_template(const Image& image, const std::optional<Circle>& pupil,
                                             const std::optional<Circle>& limbus) {
  IrisTemplate t;
  if (pupil && limbus) {
    t.seg.pupil = *pupil;
    t.seg.limbus = *limbus;
    t.seg.success = true;
  } else {
    t.seg = segment_iris(image);
  }
  if (!t.seg.success) return std::nullopt;
  t.code = iris_code(normalize_iris(image, t.seg));
  if (!(t.code.valid_fraction() > 0.0)) return std::nullopt;
  return t;
}

}  // namespace irisforge
