#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "irisforge/models.hpp"
#include "irisforge/nn/module.hpp"
#include "irisforge/toydata.hpp"

namespace irisforge {

struct TrainConfig {
  int batch = 8;
  int steps = 2000;
  float lr_style = 2e-4f;
  float lr_identity = 2e-4f;
  float lr_warp = 2e-4f;
  float lr_generator = 2e-4f;
  float lr_critic = 2e-4f;
  double lambda_sty = 1.0;
  double lambda_id_recon = 1.0;
  double lambda_id_cls = 1.0;
  double lambda_attr = 1.0;
  double lambda_gp = 10.0;
  double lambda_eps = 1.0;
  double lambda_wreg = 1.0;
  double eps_min = 0.2;  // |eps| ~ U[eps_min, eps_max] with random sign
  double eps_max = 1.0;
  bool bypass_warp = false;  // force eps = 0 in the identity pathway
  int style_steps = 1;       // interleave ratio style:identity
  int identity_steps = 1;
  int checkpoint_every = 0;  // 0: final checkpoint only
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

enum class Pathway { Style, Identity };
const char* pathway_name(Pathway p);

struct LossRecord {
  long step = 0;
  Pathway pathway = Pathway::Style;
  double g_sty = 0, d_sty = 0, sty_recon = 0;
  double g_id = 0, d_id = 0, w_reg = 0, id_recon = 0, id_cls = 0;
  double attr_real = 0, attr_fake = 0, gp = 0;
  int skipped = 0;  // identity samples whose warp gradient stayed degenerate

  bool all_finite() const;
};

std::string loss_csv_header();
std::string loss_csv_row(const LossRecord& r);

// One optimizer per trainable network; state persists across steps.
struct Optimizers {
  std::unique_ptr<nn::Adam> style, identity, warp, generator, critic;
  Optimizers(const ModelBundle& b, const TrainConfig& cfg);
};

struct Batch {
  nn::Tensor x_i;  // [B, 1, H, W] source images
  nn::Tensor x_j;  // style references
  nn::Tensor y_j;  // [B, 12]
};

// Training data held in memory as signed tensors.
struct TrainingSet {
  std::vector<std::vector<float>> images;
  std::vector<AttributeVector> attributes;
  std::vector<std::int64_t> identities;
  int size = 0;

  static TrainingSet from_manifest(const Manifest& m);
  Batch sample(int batch, std::mt19937_64& rng) const;
};

LossRecord style_pathway_step(ModelBundle& b, const Batch& batch, const TrainConfig& cfg, Optimizers& opt,
                              std::mt19937_64& rng);
LossRecord identity_pathway_step(ModelBundle& b, const Batch& batch, const TrainConfig& cfg, Optimizers& opt,
                                 std::mt19937_64& rng);

// Pathway of the given step under the interleave ratio.
Pathway pathway_for_step(const TrainConfig& cfg, long step);

struct TrainResult {
  std::vector<LossRecord> log;
  std::filesystem::path checkpoint;
};

// Trains the bundle in place; the classifier must already be pretrained and
// frozen. Writes losses.csv and checkpoints under out_dir.
TrainResult train(ModelBundle& b, const TrainConfig& cfg, const Manifest& train_set, const std::filesystem::path& out_dir);

}  // namespace irisforge
