#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irisforge/models.hpp"
#include "irisforge/synthesis.hpp"
#include "irisforge/toydata.hpp"

namespace irisforge {

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

// Equal-width bins over [lo, hi]; the last bin is closed. Values outside the
// range are clamped into the end bins.
std::vector<HistogramBin> histogram(const std::vector<double>& scores, int bins, double lo, double hi);
std::vector<HistogramBin> emit_histogram(const std::vector<double>& scores, int bins, const std::filesystem::path& path,
                                         double lo = 0.0, double hi = 1.0);

struct QualityResult {
  std::vector<int> overall;            // per sample, 255 on failure
  std::vector<bool> rejected;
  std::vector<HistogramBin> histogram; // 10 bins over [0,100]
  std::size_t failed_bucket = 0;       // the 255 bucket
  double rejection_rate = 0.0;
};

// Writes quality.csv and hist_quality.csv under out_dir when it is non-empty.
QualityResult quality_experiment(const Manifest& m, const std::filesystem::path& out_dir = {});

struct MatchScoreSet {
  std::vector<double> genuine_real;
  std::vector<double> impostor_real;
  std::vector<double> synth_vs_source;
  std::vector<double> synth_genuine;
  std::vector<double> synth_impostor;
};

struct UniquenessSummary {
  double mean_genuine_real = 0.0;
  double mean_impostor_real = 0.0;
  double mean_synth_vs_source = 0.0;
  double mean_synth_genuine = 0.0;
  double mean_synth_impostor = 0.0;
  std::size_t failed_real = 0;   // images without a template
  std::size_t failed_synth = 0;
};

struct UniquenessResult {
  MatchScoreSet scores;
  UniquenessSummary summary;
};

inline constexpr std::size_t kDefaultPairBudget = 2000;

// Real images use manifest circles when present; synthetic ones are segmented.
UniquenessResult uniqueness_experiment(const Manifest& real, const Manifest& synth,
                                       const std::vector<ProvenanceEntry>& provenance, std::size_t pairs_budget,
                                       std::uint64_t seed, const std::filesystem::path& out_dir = {});

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double tar = 0.0;
};
// Accept when distance <= threshold; one point per distinct score.
std::vector<RocPoint> roc_curve(const std::vector<double>& genuine_dist, const std::vector<double>& impostor_dist);

struct UtilityArm {
  std::string name;
  std::size_t train_images = 0;
  double tar_far_01 = 0.0;   // FAR 0.1
  double tar_far_001 = 0.0;  // FAR 0.01
  double genuine_mean = 0.0;
  double impostor_mean = 0.0;
};

struct UtilityReport {
  UtilityArm real_only;
  UtilityArm real_synth;
  double delta_far_01 = 0.0;
  double delta_far_001 = 0.0;
};

struct UtilityConfig {
  NetConfig net;
  ClassifierConfig classifier;
};

// Trains the embedding network on real_train and on real_train + synth_train
// with identical budgets, then verifies all pairs of test.
UtilityReport utility_experiment(const Manifest& real_train, const Manifest& synth_train, const Manifest& test,
                                 const UtilityConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& out_dir = {});

// Paths made absolute so samples from several roots can share a manifest.
Manifest merge_manifests(const Manifest& a, const Manifest& b);

}  // namespace irisforge
