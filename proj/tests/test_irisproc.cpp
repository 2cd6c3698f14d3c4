#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "irisforge/error.hpp"
#include "irisforge/irisproc.hpp"
#include "irisforge/toydata.hpp"
#include "irisforge/util.hpp"

using namespace irisforge;

namespace {

RenderedIris toy(std::int64_t id, int combination, std::uint64_t rng = 3) {
  return render_toy_iris(id, AttributeVector::from_combination(combination), 64, rng);
}

Image uniform(int size, float v) {
  Image img(size, size);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

double circle_error(const Circle& a, const Circle& b) {
  return std::max(std::hypot(a.cx - b.cx, a.cy - b.cy), std::abs(a.r - b.r));
}

IrisCode code_of(const Image& img) {
  auto t = extract_template(img);
  REQUIRE(t.has_value());
  return t->code;
}

PolarStrip random_strip(std::mt19937_64& rng) {
  PolarStrip s;
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  s.values.resize(s.rows * s.cols);
  for (auto& v : s.values) v = u(rng);
  s.mask.assign(s.rows * s.cols, 1);
  return s;
}

}  // namespace

TEST_CASE("segmentation recovers rendered circles") {
  for (int c = 0; c < 50; ++c) {
    const auto r = toy(c % 7, c, 100 + c);
    const auto seg = segment_iris(r.image);
    INFO("combination " << c);
    REQUIRE(seg.success);
    CHECK(circle_error(seg.pupil, r.pupil) <= 2.0);
    CHECK(circle_error(seg.limbus, r.limbus) <= 2.0);
  }
}

TEST_CASE("uniform image fails segmentation") {
  CHECK_FALSE(segment_iris(uniform(64, 0.5f)).success);
  CHECK_FALSE(segment_iris(uniform(64, 0.0f)).success);
}

TEST_CASE("shifted iris moves detected center by the shift") {
  const auto a = segment_iris(toy(4, 0).image);
  const auto b = segment_iris(toy(4, 5).image);
  REQUIRE(a.success);
  REQUIRE(b.success);
  CHECK(std::abs(b.pupil.cx - a.pupil.cx - 5.0) <= 2.0);
  CHECK(std::abs(b.pupil.cy - a.pupil.cy - 5.0) <= 2.0);
}

TEST_CASE("normalization of concentric circles") {
  Segmentation seg;
  seg.pupil = {32, 32, 6};
  seg.limbus = {32, 32, 20};
  seg.success = true;
  Image img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y) = static_cast<float>(std::hypot(x - 32.0, y - 32.0) / 40.0);
  const auto strip = normalize_iris(img, seg);
  CHECK(std::count(strip.mask.begin(), strip.mask.end(), 1) == strip.rows * strip.cols);
  for (int j = 0; j < strip.cols; ++j) {
    for (int i = 1; i < strip.rows; ++i) CHECK(strip.values[i * strip.cols + j] > strip.values[(i - 1) * strip.cols + j]);
    const double r0 = 6.0 + (0.5 / strip.rows) * 14.0;
    CHECK(strip.values[j] == doctest::Approx(r0 / 40.0).epsilon(0.02));
  }
  CHECK_THROWS_AS(normalize_iris(img, Segmentation{}), SegmentationError);
}

TEST_CASE("rotating the scene shifts strip columns") {
  const auto scene = ToyScene::for_size(11, 5, 64);
  const auto base = render_scene(scene, 64, 64, 32, 32, 0.0, 1.0);
  Segmentation seg;
  seg.pupil = base.pupil;
  seg.limbus = base.limbus;
  seg.success = true;
  const auto s0 = normalize_iris(base.image, seg);
  for (double angle : {10.0, 12.0, 15.0, 18.0, -20.0}) {
    const auto rot = render_scene(scene, 64, 64, 32, 32, angle, 1.0);
    const auto s1 = normalize_iris(rot.image, seg);
    int best = 0;
    double best_err = 1e30;
    for (int k = -s0.cols / 2; k < s0.cols / 2; ++k) {
      double e = 0.0;
      for (int i = 0; i < s0.rows; ++i)
        for (int j = 0; j < s0.cols; ++j) {
          const double d = s1.values[i * s0.cols + ((j + k) % s0.cols + s0.cols) % s0.cols] - s0.values[i * s0.cols + j];
          e += d * d;
        }
      if (e < best_err) best_err = e, best = k;
    }
    // Polar angle is measured in image coordinates, the same frame the renderer rotates in.
    const double expected = angle * s0.cols / 360.0;
    INFO("angle " << angle << " best shift " << best);
    CHECK(std::abs(best - expected) <= 1.0);
  }
}

TEST_CASE("iris code sign symmetry and determinism") {
  std::mt19937_64 rng(21);
  const auto strip = random_strip(rng);
  auto neg = strip;
  for (auto& v : neg.values) v = -v;
  const auto a = iris_code(strip), b = iris_code(neg), c = iris_code(strip);
  CHECK(a.bits == c.bits);
  CHECK(a.mask == c.mask);
  for (std::size_t k = 0; k < a.mask.size(); ++k) {
    if (!a.mask[k]) continue;
    CHECK(a.bits[2 * k] != b.bits[2 * k]);
    CHECK(a.bits[2 * k + 1] != b.bits[2 * k + 1]);
  }
}

TEST_CASE("independent random strips give fractional distance near one half") {
  std::mt19937_64 rng(99);
  double sum = 0.0;
  const int pairs = 200;
  for (int p = 0; p < pairs; ++p) {
    const auto a = iris_code(random_strip(rng));
    const auto b = iris_code(random_strip(rng));
    sum += hamming_distance(a, b, 0);
  }
  CHECK(std::abs(sum / pairs - 0.5) <= 0.1);
}

TEST_CASE("match self, complement and symmetry") {
  const auto a = code_of(toy(1, 0).image);
  CHECK(match_codes(a, a) == 1.0);
  auto comp = a;
  for (auto& b : comp.bits) b = !b;
  CHECK(hamming_distance(a, comp, 0) == 1.0);
  CHECK(match_codes(a, comp) < match_codes(a, a));
  const auto b = code_of(toy(2, 7).image);
  CHECK(match_codes(a, b) == match_codes(b, a));
  IrisCode empty = a;
  std::fill(empty.mask.begin(), empty.mask.end(), 0);
  CHECK_THROWS_AS(match_codes(a, empty), NoOverlap);
}

TEST_CASE("genuine toy pairs are similar, impostors near chance") {
  for (int c = 1; c < 50; c += 7) {
    const auto a = code_of(toy(7, 0).image);
    const auto b = code_of(toy(7, c, 77).image);
    INFO("combination " << c);
    CHECK(match_codes(a, b) > 0.7);
    CHECK(1.0 - match_codes(a, b) < 0.3);
  }
  const auto s7 = code_of(toy(7, 3).image);
  const auto s8 = code_of(toy(8, 3).image);
  CHECK(std::abs(hamming_distance(s7, s8, 0) - 0.5) <= 0.1);
}

TEST_CASE("genuine minus impostor separation on toy pairs") {
  std::vector<IrisCode> codes;
  std::vector<int> ids;
  for (int id = 0; id < 20; ++id)
    for (int k = 0; k < 6; ++k) {
      const std::size_t g = id * 6 + k;
      codes.push_back(code_of(toy(id, toy_combination_for(g), derive_seed(5, g)).image));
      ids.push_back(id);
    }
  double gs = 0, is = 0;
  int gn = 0, in = 0;
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t j = i + 1; j < codes.size(); ++j) {
      const double hd = 1.0 - match_codes(codes[i], codes[j]);
      if (ids[i] == ids[j]) gs += hd, ++gn;
      else is += hd, ++in;
    }
  REQUIRE(gn >= 100);
  CHECK(is / in - gs / gn >= 0.15);
}

TEST_CASE("similarity is stable under scene rotation") {
  const auto scene = ToyScene::for_size(13, 2, 64);
  const auto ref = code_of(render_scene(scene, 64, 64, 32, 32, 0.0, 1.0).image);
  const auto other = code_of(render_scene(ToyScene::for_size(14, 2, 64), 64, 64, 32, 32, 0.0, 1.0).image);
  const double base_impostor = match_codes(ref, other);
  double sum = 0.0;
  int n = 0;
  for (double angle = -45.0; angle <= 45.0; angle += 5.625) {
    const auto c = code_of(render_scene(scene, 64, 64, 32, 32, angle, 1.0).image);
    INFO("angle " << angle);
    CHECK(match_codes(ref, c) >= 0.95);
    CHECK(std::abs(match_codes(other, c) - base_impostor) <= 0.1);
    sum += match_codes(ref, c);
    ++n;
  }
  CHECK(1.0 - sum / n <= 0.02);
}

TEST_CASE("polygon circularity oracle") {
  std::vector<double> xs, ys;
  const int n = 32;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    xs.push_back(10 * std::cos(t));
    ys.push_back(10 * std::sin(t));
  }
  // Regular n-gon: 4*pi*A/P^2 = pi / (n tan(pi/n)).
  CHECK(polygon_circularity(xs, ys) == doctest::Approx(std::numbers::pi / (n * std::tan(std::numbers::pi / n))));
  CHECK(polygon_circularity({0, 1, 1, 0}, {0, 0, 1, 1}) == doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("quality components on clean and blurred toy irises") {
  int lower = 0;
  for (int g = 0; g < 100; ++g) {
    const auto r = toy(g / 5, toy_combination_for(g), derive_seed(9, g));
    const auto q = assess_quality(r.image);
    INFO("sample " << g);
    REQUIRE(q.overall != kQualityFailure);
    CHECK(q.overall >= 70);
    CHECK(q.circularity >= 95.0);
    CHECK(q.usable_area == 100.0);
    const auto b = assess_quality(gaussian_blur(r.image, 3.0));
    if (b.overall == kQualityFailure || b.sharpness < q.sharpness) ++lower;
  }
  CHECK(lower >= 95);
}

TEST_CASE("overall quality combination") {
  QualityReport q;
  q.usable_area = q.sclera_contrast = q.pupil_contrast = q.sharpness = q.circularity = 100.0;
  CHECK(combine_quality(q) == 100);
  q.circularity = 25.0;
  CHECK(combine_quality(q) == static_cast<int>(std::lround(100.0 * std::pow(0.25, 0.2))));
  CHECK(combine_quality(q) == 76);
  q.sharpness = 0.0;
  CHECK(combine_quality(q) == 0);
  CHECK(overall_quality(uniform(64, 0.5f)) == kQualityFailure);
}

TEST_CASE("partially out-of-frame annulus reduces usable area") {
  Segmentation seg;
  seg.pupil = {8, 32, 5};
  seg.limbus = {8, 32, 18};
  seg.success = true;
  const auto r = toy(3, 0);
  const auto q = quality_components(r.image, seg);
  CHECK(q.usable_area < 100.0);
  CHECK(q.usable_area > 0.0);
  CHECK(q.overall == kQualityFailure);
  CHECK_THROWS_AS(quality_components(r.image, Segmentation{}), SegmentationError);
}

TEST_CASE("sharpness reference matches median clean toy energy") {
  std::vector<Image> imgs;
  for (int g = 0; g < 200; ++g)
    imgs.push_back(toy(g / 10, toy_combination_for(g), derive_seed(1, g)).image);
  CHECK(calibrate_sharpness_reference(imgs) == doctest::Approx(QualityConfig{}.sharpness_reference).epsilon(0.01));
}
