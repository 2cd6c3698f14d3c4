#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irisforge/image.hpp"

namespace irisforge {

enum class PupilState { contraction, dilation };

struct PixelShift {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const PixelShift&, const PixelShift&) = default;
};

// Decoded style: eye orientation, iris-center offset and pupil state.
struct Style {
  int angle_deg = 0;
  PixelShift shift;
  PupilState pupil = PupilState::contraction;
  friend bool operator==(const Style&, const Style&) = default;
};

inline constexpr std::array<int, 5> kAngles{0, 10, 12, 15, 18};
inline constexpr std::array<PixelShift, 5> kShifts{
    PixelShift{0, 0}, PixelShift{5, 5}, PixelShift{10, 10}, PixelShift{-10, 10},
    PixelShift{-10, -10}};
inline constexpr int kAttributeBits = 12;
inline constexpr int kStyleCombinations = 50;

// 12-bit style descriptor: one-hot angle (5), one-hot shift (5), then the
// (contraction, dilation) pair.
class AttributeVector {
 public:
  using Bits = std::array<std::uint8_t, kAttributeBits>;

  // Throws InvalidAttribute unless the bits satisfy the one-hot layout.
  explicit AttributeVector(const Bits& bits);

  const Bits& bits() const { return bits_; }
  std::uint8_t operator[](int i) const { return bits_[i]; }

  // 12-character "0"/"1" string as stored in manifests.
  std::string to_string() const;
  static AttributeVector parse(std::string_view text);

  // Index in [0, 50): angle + 5*shift + 25*pupil.
  int combination_index() const;
  static AttributeVector from_combination(int index);

  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;

 private:
  Bits bits_;
};

AttributeVector encode_attributes(int angle_deg, PixelShift shift, PupilState pupil);
AttributeVector encode_attributes(const Style& style);
Style decode_attributes(const AttributeVector& v);
// Validates raw bits, then decodes.
Style decode_attributes(const AttributeVector::Bits& bits);

struct PupilFactors {
  double contraction = 0.8;
  double dilation = 1.25;
  double factor(PupilState s) const { return s == PupilState::dilation ? dilation : contraction; }
};

// What the transform needs to know about the source image's eye geometry.
struct EyeGeometry {
  double cx = 0.0;
  double cy = 0.0;
  std::optional<double> pupil_radius;
  std::optional<double> limbus_radius;
};

// Rotates the image about the iris center by the decoded angle, rescales the
// pupil by the configured factor with a piecewise-linear radial remap between
// the pupil and limbus circles, and crops a `crop` x `crop` window whose center
// sits at the decoded shift from the iris center.
Image apply_style_transform(const Image& image, const EyeGeometry& eye, const AttributeVector& v,
                            int crop, const PupilFactors& factors = {});

}  // namespace irisforge
