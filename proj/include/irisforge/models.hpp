#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irisforge/attribute.hpp"
#include "irisforge/image.hpp"
#include "irisforge/nn/module.hpp"
#include "irisforge/toydata.hpp"
#include "irisforge/warp.hpp"

namespace irisforge {

struct NetConfig {
  int image_size = 64;
  int latent_dim = 64;   // d_z
  int style_dim = 64;    // d_s
  std::array<int, 4> channels{8, 16, 32, 64};
  int warps = 8;         // M
  int rbfs = 16;         // K
  int feature_dim = 32;  // classifier embedding
  int recon_hidden = 64;

  void validate() const;  // throws ConfigError
  int bottleneck() const { return image_size / 16; }
};

// Four stride-2 convolutions, leaky ReLU, flatten.
struct ConvTrunk {
  std::array<nn::Conv2d, 4> convs;
  ConvTrunk() = default;
  ConvTrunk(nn::ParameterSet& ps, const std::string& name, int in_channels, const NetConfig& cfg,
            std::mt19937_64& rng);
  nn::Var operator()(const nn::Var& x) const;  // [N, C*b*b]
};

struct StyleEncoder {
  ConvTrunk trunk;
  nn::Linear head;
  nn::Var operator()(const nn::Var& x, const nn::Var& y) const;  // y: [N, 12]
};

struct IdentityEncoder {
  ConvTrunk trunk;
  nn::Linear head;
  nn::Var operator()(const nn::Var& x) const;
};

struct Generator {
  nn::Linear fc;
  std::array<nn::ConvTranspose2d, 4> ups;
  std::array<nn::InstanceNorm, 3> norms;
  int channels = 0, bottleneck = 0;
  nn::Var operator()(const nn::Var& d, const nn::Var& s) const;  // -> [N, 1, H, W] in [-1, 1]
};

struct Discriminator {
  ConvTrunk trunk;
  nn::Linear realness, attributes;
  struct Out {
    nn::Var realness;    // [N, 1]
    nn::Var attributes;  // [N, 12]
  };
  Out operator()(const nn::Var& x) const;
};

struct Classifier {
  ConvTrunk trunk;
  nn::Linear head;
  nn::Var operator()(const nn::Var& x) const;  // L2-normalized [N, F]
};

// Warp functions as trainable tensors plus the reconstructor that recovers
// (m, eps) from the code pair (z, z_bar).
struct WarpNetwork {
  nn::Var centers;     // [M, K, d]
  nn::Var weights;     // [M, K]
  nn::Var raw_scales;  // [M, K]; u = softplus(raw)
  nn::Linear recon_hidden, recon_logits, recon_eps;

  WarpParams params() const;
  // Shifts each row of z [N, d] along warp ms[i] by eps[i]; differentiable in
  // z and in the warp tensors. eps == 0 rows pass through.
  nn::Var shift(const nn::Var& z, const std::vector<int>& ms, const std::vector<double>& eps) const;
  struct Recon {
    nn::Var logits;  // [N, M]
    nn::Var eps;     // [N, 1]
  };
  Recon reconstruct(const nn::Var& z, const nn::Var& z_bar) const;
};

struct ModelBundle {
  NetConfig cfg;
  nn::ParameterSet style_params, identity_params, warp_params, generator_params, critic_params,
      classifier_params;
  StyleEncoder style_encoder;     // E_S
  IdentityEncoder identity_encoder;  // E
  WarpNetwork warp;               // W (+ R)
  Generator generator;            // G
  Discriminator critic;           // D
  Classifier classifier;          // C
  bool classifier_frozen = false;

  ModelBundle() = default;
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  std::vector<nn::ParameterSet*> parameter_sets();
  std::vector<const nn::ParameterSet*> parameter_sets() const;
  std::vector<std::string> set_names() const;
  // Hash over every parameter of every network.
  std::uint64_t hash() const;
  void freeze_classifier();
};

std::unique_ptr<ModelBundle> build_models(const NetConfig& cfg, std::uint64_t seed);

// Conversions between images and [N, 1, H, W] tensors in [-1, 1].
nn::Tensor images_to_tensor(const std::vector<Image>& images);
nn::Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const nn::Tensor& t, int index = 0);
nn::Tensor attributes_to_tensor(const std::vector<AttributeVector>& ys);

std::vector<double> encode_style(const ModelBundle& b, const Image& image, const AttributeVector& y);
struct IdentityCodes {
  LatentCode z;
  LatentCode z_bar;
};
IdentityCodes encode_identity(const ModelBundle& b, const Image& image, int m, double eps);
Image generate(const ModelBundle& b, std::span<const double> d, std::span<const double> s);
std::vector<double> classifier_features(const ModelBundle& b, const Image& image);

struct ClassifierConfig {
  int steps = 400;
  int triplets = 16;   // per step
  float lr = 1e-3f;
  double margin = 0.2;
  int holdout_every = 5;  // every k-th sample of each identity is held out
};

struct ClassifierReport {
  double tar_at_far10 = 0.0;
  double genuine_mean_distance = 0.0;
  double impostor_mean_distance = 0.0;
  double final_loss = 0.0;
  int train_samples = 0;
  int heldout_samples = 0;
};

// Loads every image of a manifest as a signed tensor row set.
std::vector<Image> load_images(const Manifest& m);

// Triplet training of C on the manifest's identities; freezes C afterwards.
ClassifierReport pretrain_classifier(ModelBundle& b, const Manifest& train, const ClassifierConfig& cfg,
                                     std::uint64_t seed);

// Squared-distance triplet loss on L2 features: mean max(0, |a-p|^2 - |a-n|^2 + margin).
double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double margin);

// True-accept rate at the given false-accept rate for distance scores
// (lower = more similar).
double tar_at_far(std::vector<double> genuine_dist, std::vector<double> impostor_dist, double far);

inline constexpr char kCheckpointMagic[8] = {'I', 'R', 'I', 'S', 'F', 'R', 'G', '1'};
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const ModelBundle& b, const std::filesystem::path& path);
std::unique_ptr<ModelBundle> load_checkpoint(const std::filesystem::path& path);
// Copies the classifier parameters (and frozen flag) from another bundle.
void copy_classifier(ModelBundle& dst, const ModelBundle& src);

}  // namespace irisforge
