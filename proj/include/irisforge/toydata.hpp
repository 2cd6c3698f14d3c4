#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irisforge/attribute.hpp"
#include "irisforge/image.hpp"

namespace irisforge {

struct IrisSample {
  std::string image_path;  // relative to the manifest directory, or absolute
  std::int64_t identity_id = 0;
  AttributeVector attribute = AttributeVector::from_combination(0);
  std::optional<Circle> pupil;
  std::optional<Circle> limbus;
};

struct Manifest {
  int image_size = 0;
  std::uint64_t seed = 0;
  std::string version = "1";
  std::vector<IrisSample> samples;
  std::filesystem::path base_dir;  // where relative image paths resolve

  std::filesystem::path resolve(const IrisSample& s) const;
  std::vector<std::int64_t> identities() const;  // sorted, unique
  std::size_t identity_count() const { return identities().size(); }
};

// A rendered sample together with its pixels.
struct RenderedIris {
  Image image;
  Circle pupil;
  Circle limbus;
};

// Canonical eye scene: texture and radii in the iris frame.
struct ToyScene {
  std::int64_t identity_seed = 0;
  std::uint64_t rng_seed = 0;
  double pupil_radius = 0.0;   // before the pupil-state factor
  double limbus_radius = 0.0;

  static ToyScene for_size(std::int64_t identity_seed, std::uint64_t rng_seed, int size);
};

// Renders the scene on a width x height canvas with the iris centered at
// (cx, cy), rotated by angle_deg, pupil radius scaled by pupil_scale.
RenderedIris render_scene(const ToyScene& scene, int width, int height, double cx, double cy,
                          double angle_deg, double pupil_scale);

// Iris texture value in [0,1] at normalized radius rho in [0,1] and angle phi
// (radians) in the iris frame. Deterministic in identity_seed.
double iris_texture(std::int64_t identity_seed, double rho, double phi);

RenderedIris render_toy_iris(std::int64_t identity_seed, const AttributeVector& v, int size,
                             std::uint64_t rng_seed, const PupilFactors& factors = {});

// Combination index used for the k-th sample of the dataset (cycling rule).
int toy_combination_for(std::size_t global_index);

Manifest build_toy_dataset(int n_identities, int styles_per_identity, int size, std::uint64_t seed,
                           const std::filesystem::path& out_dir);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);
// Hash over the manifest JSON plus the bytes of every referenced image.
std::uint64_t manifest_content_hash(const Manifest& m);

// Identity-disjoint split; train_fraction applies to the identity count.
std::pair<Manifest, Manifest> split_dataset(const Manifest& m, double train_fraction,
                                            std::uint64_t seed);

}  // namespace irisforge
