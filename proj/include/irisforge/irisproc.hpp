#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "irisforge/image.hpp"

namespace irisforge {

struct Segmentation {
  Circle pupil;
  Circle limbus;
  bool success = false;
  double pupil_response = 0.0;   // peak smoothed radial derivative
  double limbus_response = 0.0;
};

struct SegmenterConfig {
  double min_response = 0.06;       // intensity step below which a boundary is rejected
  double pupil_min_frac = 0.05;     // pupil radius range as a fraction of the image side
  double pupil_max_frac = 0.22;
  double center_range_frac = 0.25;  // pupil center search half-width around the image center
  double pupil_dark_weight = 2.0;   // penalty on mean brightness inside a pupil candidate (coarse search)
  double pupil_refine_dark_weight = 1.0;
  double limbus_min_ratio = 1.5;
  double limbus_max_ratio = 4.0;
  int circle_samples = 64;
};

// Coarse-to-fine integro-differential search: pupil first, then the limbus
// constrained to 1.5-4x the pupil radius around the pupil center.
Segmentation segment_iris(const Image& image, const SegmenterConfig& cfg = {});

// Polar strip between pupil and limbus boundaries; mask marks samples that
// fall inside the image.
struct PolarStrip {
  int rows = 8;
  int cols = 64;
  std::vector<float> values;         // rows*cols
  std::vector<std::uint8_t> mask;    // rows*cols
};

inline constexpr int kCodeRows = 8;
inline constexpr int kCodeCols = 64;

PolarStrip normalize_iris(const Image& image, const Segmentation& seg, int rows = kCodeRows,
                          int cols = kCodeCols);

struct IrisCode {
  int rows = kCodeRows;
  int cols = kCodeCols;
  std::vector<std::uint8_t> bits;  // rows*cols*2: (real, imag) sign bits per cell
  std::vector<std::uint8_t> mask;  // rows*cols
  double valid_fraction() const;
};

struct GaborConfig {
  double wavelength = 8.0;  // in strip columns
  double sigma = 2.0;
  // Cells whose weaker part is below this fraction of the RMS response are masked.
  double fragile_fraction = 0.15;
};

IrisCode iris_code(const PolarStrip& strip, const GaborConfig& cfg = {});

inline constexpr int kMaxRotation = 8;

// 1 - min over column rotations in [-8, 8] of the masked fractional Hamming
// distance. Throws NoOverlap when no rotation has any jointly valid cell.
double match_codes(const IrisCode& a, const IrisCode& b, int max_rotation = kMaxRotation);
double hamming_distance(const IrisCode& a, const IrisCode& b, int rotation);

struct QualityReport {
  double usable_area = 0.0;
  double sclera_contrast = 0.0;
  double pupil_contrast = 0.0;
  double sharpness = 0.0;
  double circularity = 0.0;
  int overall = 255;
};

inline constexpr int kQualityFailure = 255;

struct QualityConfig {
  // Mean squared LoG response over the iris annulus of a median clean toy
  // iris; see calibrate_sharpness_reference().
  double sharpness_reference = 6.382e-4;
  double log_sigma = 1.0;
  double contrast_delta = 1e-3;
};

// Components only (overall left at 255); throws SegmentationError on failure.
QualityReport quality_components(const Image& image, const Segmentation& seg, const QualityConfig& cfg = {});
// Geometric mean of the five components rounded to an integer in [0,100].
int combine_quality(const QualityReport& components);
QualityReport assess_quality(const Image& image, const QualityConfig& cfg = {});
int overall_quality(const Image& image, const QualityConfig& cfg = {});

double log_energy(const Image& image, const Segmentation& seg, double log_sigma = 1.0);
double calibrate_sharpness_reference(const std::vector<Image>& clean_images, double log_sigma = 1.0);

// 4*pi*A/P^2 of a closed polygon.
double polygon_circularity(const std::vector<double>& xs, const std::vector<double>& ys);

// Segmentation plus code, or nullopt when either fails. Known circles skip
// detection.
struct IrisTemplate {
  Segmentation seg;
  IrisCode code;
};
std::optional<IrisTemplate> extract_template(const Image& image,
                                             const std::optional<Circle>& pupil = std::nullopt,
                                             const std::optional<Circle>& limbus = std::nullopt);

}  // namespace irisforge
