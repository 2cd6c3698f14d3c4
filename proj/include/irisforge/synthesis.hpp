#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irisforge/models.hpp"
#include "irisforge/toydata.hpp"

namespace irisforge {

inline constexpr std::int64_t kSyntheticIdOffset = 1'000'000;

struct MintedIdentity {
  std::int64_t identity_id = 0;
  std::string source_path;          // as written in the source manifest
  std::int64_t source_identity = 0;
  int m = 0;
  double epsilon = 0.0;
  LatentCode code;                  // d_bar
  std::uint64_t checkpoint_hash = 0;
};

// Shifts E(source image) along warp m by eps. eps == 0 returns the unshifted
// code; callers that want a new identity must use |eps| > 0.
MintedIdentity mint_identity(const ModelBundle& b, const Manifest& source, std::size_t sample_index, int m,
                             double eps, std::int64_t identity_id = kSyntheticIdOffset);

// G([d_bar || E_S(style image, style attribute)]). Throws CheckpointError if the
// bundle is not the one that minted the identity.
Image synthesize_image(const ModelBundle& b, const MintedIdentity& id, const Image& style_image,
                       const AttributeVector& style_attribute);

struct ProvenanceEntry {
  std::int64_t identity_id = 0;
  std::string source_path;
  std::int64_t source_identity = 0;
  int m = 0;
  double epsilon = 0.0;
};

struct GenerationConfig {
  double eps_min = 0.5;  // |eps| ~ U[eps_min, eps_max] per minted identity
  double eps_max = 1.5;
};

// Mints n_identities identities and renders styles_per_identity images of each.
// Writes images/, manifest.json and provenance.json under out_dir.
Manifest generate_dataset(const ModelBundle& b, const Manifest& source, int n_identities, int styles_per_identity,
                          std::uint64_t seed, const std::filesystem::path& out_dir, const GenerationConfig& cfg = {});

void save_provenance(const std::vector<ProvenanceEntry>& entries, std::uint64_t checkpoint_hash,
                     const std::filesystem::path& path);
std::vector<ProvenanceEntry> load_provenance(const std::filesystem::path& path);

// Temporarily takes every parameter of a bundle off the tape.
class InferenceGuard {
 public:
  explicit InferenceGuard(const ModelBundle& b);
  ~InferenceGuard();
  InferenceGuard(const InferenceGuard&) = delete;
  InferenceGuard& operator=(const InferenceGuard&) = delete;

 private:
  std::vector<std::pair<nn::Var, bool>> saved_;
};

}  // namespace irisforge
