#include "irisforge/attribute.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "irisforge/error.hpp"

namespace irisforge {
namespace {

int hot_index(const AttributeVector::Bits& bits, int begin, int end, const char* group) {
  int found = -1;
  for (int i = begin; i < end; ++i) {
    if (bits[i] > 1) throw InvalidAttribute("attribute bits must be 0 or 1");
    if (bits[i] == 1) {
      if (found >= 0) throw InvalidAttribute(std::string("multiple hot bits in ") + group + " group");
      found = i - begin;
    }
  }
  if (found < 0) throw InvalidAttribute(std::string("no hot bit in ") + group + " group");
  return found;
}

}  // namespace

AttributeVector::AttributeVector(const Bits& bits) : bits_(bits) {
  hot_index(bits_, 0, 5, "angle");
  hot_index(bits_, 5, 10, "shift");
  hot_index(bits_, 10, 12, "pupil");
}

std::string AttributeVector::to_string() const {
  std::string s(kAttributeBits, '0');
  for (int i = 0; i < kAttributeBits; ++i) s[i] = bits_[i] ? '1' : '0';
  return s;
}

AttributeVector AttributeVector::parse(std::string_view text) {
  if (text.size() != kAttributeBits) throw InvalidAttribute("attribute string must have 12 characters");
  Bits bits{};
  for (int i = 0; i < kAttributeBits; ++i) {
    if (text[i] != '0' && text[i] != '1') throw InvalidAttribute("attribute string must be 0/1");
    bits[i] = text[i] == '1';
  }
  return AttributeVector(bits);
}

int AttributeVector::combination_index() const {
  const int a = hot_index(bits_, 0, 5, "angle");
  const int s = hot_index(bits_, 5, 10, "shift");
  const int p = hot_index(bits_, 10, 12, "pupil");
  return a + 5 * s + 25 * p;
}

AttributeVector AttributeVector::from_combination(int index) {
  if (index < 0 || index >= kStyleCombinations) throw InvalidAttribute("combination index out of range");
  Bits bits{};
  bits[index % 5] = 1;
  bits[5 + (index / 5) % 5] = 1;
  bits[10 + index / 25] = 1;
  return AttributeVector(bits);
}

AttributeVector encode_attributes(int angle_deg, PixelShift shift, PupilState pupil) {
  const auto a = std::find(kAngles.begin(), kAngles.end(), angle_deg);
  if (a == kAngles.end()) throw InvalidAttribute("angle not in {0,10,12,15,18}: " + std::to_string(angle_deg));
  const auto s = std::find(kShifts.begin(), kShifts.end(), shift);
  if (s == kShifts.end())
    throw InvalidAttribute("position shift not allowed: [" + std::to_string(shift.dx) + "," +
                           std::to_string(shift.dy) + "]");
  AttributeVector::Bits bits{};
  bits[a - kAngles.begin()] = 1;
  bits[5 + (s - kShifts.begin())] = 1;
  bits[pupil == PupilState::contraction ? 10 : 11] = 1;
  return AttributeVector(bits);
}

AttributeVector encode_attributes(const Style& style) {
  return encode_attributes(style.angle_deg, style.shift, style.pupil);
}

Style decode_attributes(const AttributeVector& v) { return decode_attributes(v.bits()); }

Style decode_attributes(const AttributeVector::Bits& bits) {
  Style st;
  st.angle_deg = kAngles[hot_index(bits, 0, 5, "angle")];
  st.shift = kShifts[hot_index(bits, 5, 10, "shift")];
  st.pupil = hot_index(bits, 10, 12, "pupil") == 0 ? PupilState::contraction : PupilState::dilation;
  return st;
}

Image apply_style_transform(const Image& image, const EyeGeometry& eye, const AttributeVector& v,
                            int crop, const PupilFactors& factors) {
  if (crop <= 0) throw GeometryError("crop side must be positive");
  const Style st = decode_attributes(v);
  const double factor = factors.factor(st.pupil);
  const bool remap = factor != 1.0;
  double rp = 0.0, rl = 0.0, rp_out = 0.0;
  if (remap) {
    if (!eye.pupil_radius) throw MissingAnnotation("pupil radius required for pupil remap");
    if (!eye.limbus_radius) throw MissingAnnotation("limbus radius required for pupil remap");
    rp = *eye.pupil_radius;
    rl = *eye.limbus_radius;
    rp_out = rp * factor;
    if (!(rp > 0.0) || !(rp < rl) || !(rp_out < rl))
      throw GeometryError("pupil radius must stay inside the limbus");
  }

  const double theta = st.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double ox = crop / 2 + st.shift.dx;
  const double oy = crop / 2 + st.shift.dy;

  // Output pixel -> source coordinate.
  auto source_of = [&](double u, double w, double& sx, double& sy) {
    double rx = u - ox;
    double ry = w - oy;
    if (remap) {
      const double r = std::hypot(rx, ry);
      double rs = r;
      if (r <= rp_out) {
        rs = r * rp / rp_out;
      } else if (r < rl) {
        rs = rp + (r - rp_out) * (rl - rp) / (rl - rp_out);
      }
      if (r > 0.0) {
        rx *= rs / r;
        ry *= rs / r;
      }
    }
    // Inverse rotation: content rotated by +theta in the output.
    sx = eye.cx + c * rx + s * ry;
    sy = eye.cy - s * rx + c * ry;
  };

  const double last = crop - 1.0;
  for (auto [u, w] : {std::pair{0.0, 0.0}, {last, 0.0}, {0.0, last}, {last, last}}) {
    double sx, sy;
    source_of(u, w, sx, sy);
    if (!image.contains(sx, sy)) throw GeometryError("crop window exceeds image bounds");
  }

  Image out(crop, crop);
  for (int y = 0; y < crop; ++y) {
    for (int x = 0; x < crop; ++x) {
      double sx, sy;
      source_of(x, y, sx, sy);
      out.at(x, y) = sample_bilinear(image, sx, sy, 0.0f);
    }
  }
  return out;
}

}  // namespace irisforge
