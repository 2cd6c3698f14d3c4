// Acceptance suite: one line per criterion, tolerances pinned below.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include "irisforge/cli.hpp"
#include "irisforge/error.hpp"
#include "irisforge/eval.hpp"
#include "irisforge/irisproc.hpp"
#include "irisforge/json_io.hpp"
#include "irisforge/losses.hpp"
#include "irisforge/synthesis.hpp"
#include "irisforge/toydata.hpp"
#include "irisforge/training.hpp"
#include "irisforge/util.hpp"
#include "irisforge/warp.hpp"

using namespace irisforge;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kWarpDraws = 100;
constexpr double kWarpFdStep = 1e-6;
constexpr double kWarpRelErr = 1e-5;
constexpr double kShiftNormTol = 1e-6;
constexpr double kWarpSeconds = 5.0;
// Criterion 2
constexpr double kCodecSeconds = 1.0;
// Criterion 3
constexpr int kFreezeSteps = 50;
constexpr double kFreezeSeconds = 120.0;
// Criterion 4
constexpr double kLossTol = 1e-6;
// Criterion 5
constexpr int kDeterminismTrainSteps = 500;
// Criterion 6
constexpr double kMinGap = 0.15;
constexpr double kImpostorHd = 0.5;
constexpr double kImpostorHdTol = 0.1;
constexpr double kMatcherSeconds = 120.0;
// Criterion 7
constexpr int kMinCleanOverall = 70;
constexpr double kMinCircularity = 95.0;
constexpr double kBlurSigma = 3.0;
constexpr double kBlurFraction = 0.95;
// Criteria 8-10
constexpr int kTrainSteps = 8000;
constexpr double kTrainMinutes = 30.0;
constexpr int kMintedIds = 50;
constexpr int kStylesPerId = 5;
constexpr double kGapFraction = 0.25;
constexpr double kImpostorShift = 0.1;
constexpr int kRetries = 2;
constexpr double kMaxRejection = 0.10;
// Desk-scale training settings, mirrored by configs/toy_train.json
constexpr float kLrFast = 1e-3f;     // generator, critic, warps
constexpr float kLrEncoders = 1e-5f;
constexpr double kLambdaIdRecon = 0.1;
constexpr double kLambdaIdCls = 0.5;

const fs::path kWork = fs::current_path() / "acceptance_work";

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s  %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path fresh(const std::string& name) {
  const auto p = kWork / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

Outcome warp_math() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst_grad = 0.0, worst_norm = 0.0;
  for (int draw = 0; draw < kWarpDraws; ++draw) {
    const int dim = 2 + draw % 15;
    const auto p = init_warp_params(3, 4, dim, derive_seed(7, draw));
    std::vector<double> z(dim);
    for (auto& v : z) v = 0.5 * n01(rng);
    const int m = draw % 3;
    const auto g = warp_gradient(p, m, z);
    double gnorm = 0.0, err = 0.0;
    for (int i = 0; i < dim; ++i) {
      auto zp = z, zm = z;
      zp[i] += kWarpFdStep;
      zm[i] -= kWarpFdStep;
      const double fd = (eval_warp(p, m, zp) - eval_warp(p, m, zm)) / (2 * kWarpFdStep);
      err += (g[i] - fd) * (g[i] - fd);
      gnorm += g[i] * g[i];
    }
    worst_grad = std::max(worst_grad, std::sqrt(err) / std::max(std::sqrt(gnorm), 1e-300));
    const double eps = (draw % 2 ? -1.0 : 1.0) * (0.1 + 0.02 * draw);
    const auto s = shift_code(p, m, z, eps);
    double d = 0.0;
    for (int i = 0; i < dim; ++i) d += (s[i] - z[i]) * (s[i] - z[i]);
    worst_norm = std::max(worst_norm, std::abs(std::sqrt(d) - std::abs(eps)));
  }
  const double t = seconds_since(t0);
  return {worst_grad < kWarpRelErr && worst_norm <= kShiftNormTol && t < kWarpSeconds,
          fmt("max rel grad err %.2e (< %.0e), max | |dz|-|eps| | %.2e (<= %.0e), %.2fs (< %.0fs)", worst_grad,
              kWarpRelErr, worst_norm, kShiftNormTol, t, kWarpSeconds)};
}

Outcome attribute_codec() {
  const auto t0 = std::chrono::steady_clock::now();
  int ok = 0;
  for (int c = 0; c < kStyleCombinations; ++c) {
    const auto v = AttributeVector::from_combination(c);
    const Style s = decode_attributes(v);
    ok += encode_attributes(s) == v && AttributeVector::parse(v.to_string()) == v;
  }
  const AttributeVector::Bits example{0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1};
  const bool ex = encode_attributes(10, {0, 0}, PupilState::dilation).bits() == example &&
                  decode_attributes(example) == Style{10, {0, 0}, PupilState::dilation};
  const double t = seconds_since(t0);
  return {ok == kStyleCombinations && ex && t < kCodecSeconds,
          fmt("%d/%d round trips exact, worked example %s, %.3fs (< %.0fs)", ok, kStyleCombinations,
              ex ? "ok" : "wrong", t, kCodecSeconds)};
}

Outcome freeze_contracts(const Manifest& toy) {
  const auto t0 = std::chrono::steady_clock::now();
  auto b = build_models(NetConfig{}, 31);
  b->freeze_classifier();
  TrainConfig cfg;
  cfg.batch = 4;
  Optimizers opt(*b, cfg);
  const auto data = TrainingSet::from_manifest(toy);
  int violations = 0, style_steps = 0, id_steps = 0;
  for (int step = 0; step < kFreezeSteps; ++step) {
    std::mt19937_64 rng(derive_seed(31, step));
    const auto batch = data.sample(cfg.batch, rng);
    const auto e = b->identity_params.hash(), w = b->warp_params.hash(), c = b->classifier_params.hash(),
               s = b->style_params.hash();
    if (pathway_for_step(cfg, step) == Pathway::Style) {
      style_pathway_step(*b, batch, cfg, opt, rng);
      violations += e != b->identity_params.hash() || w != b->warp_params.hash() || c != b->classifier_params.hash();
      ++style_steps;
    } else {
      identity_pathway_step(*b, batch, cfg, opt, rng);
      violations += s != b->style_params.hash() || c != b->classifier_params.hash();
      ++id_steps;
    }
  }
  const double t = seconds_since(t0);
  return {violations == 0 && t < kFreezeSeconds,
          fmt("%d style + %d identity steps, %d frozen-set changes, %.1fs (< %.0fs)", style_steps, id_steps,
              violations, t, kFreezeSeconds)};
}

Outcome loss_oracles() {
  double worst = 0.0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  // Adversarial: brute means.
  const std::vector<double> dr{0.3, -1.2, 2.5, 0.7}, df{-0.4, 1.1, 0.05};
  const double mr = (0.3 - 1.2 + 2.5 + 0.7) / 4, mf = (-0.4 + 1.1 + 0.05) / 3;
  const auto [lg, ld] = adversarial_losses(dr, df);
  track(lg, -mf);
  track(ld, mf - mr);

  // Style reconstruction.
  const std::vector<double> sa{0.5, -1.0, 2.0}, sb{0.0, 1.0, 1.5};
  track(style_recon_loss(sa, sb), 0.25 + 4.0 + 0.25);

  // Warp regression: uniform logits over M=8 give ln 8.
  const std::vector<double> uniform(8, -0.7);
  const double ce_uniform = warp_regression_loss(3, 0.9, uniform, 0.9);
  track(ce_uniform, std::log(8.0));
  const std::vector<double> logits{1.0, -0.5, 0.25, 2.0};
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  track(warp_regression_loss(1, 0.6, logits, 0.2, 0.5), -std::log(std::exp(-0.5) / z) + 0.5 * 0.4);

  // Attribute BCE.
  const std::vector<double> al{0.2, -1.5, 3.0}, at{1.0, 0.0, 1.0};
  double bce = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-al[i]));
    bce -= (at[i] * std::log(p) + (1 - at[i]) * std::log(1 - p)) / 3.0;
  }
  track(attribute_loss(al, at), bce);

  // Gradient penalty on a linear critic D(x) = <w, x>: every norm is ||w||.
  const int per = 4;
  auto w = nn::parameter(nn::Tensor({per, 1}, {0.6f, 0.0f, 0.8f, 2.0f}), "w");
  auto bias = nn::parameter(nn::Tensor({1}, {0.0f}), "b");
  auto critic = [&](const nn::Var& x) { return nn::linear(nn::reshape(x, {x->value.dim(0), per}), w, bias); };
  nn::Tensor real({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}), fake({2, 1, 2, 2}, {0, 1, 0, 1, 1, 0, 1, 0});
  const auto pen = losses::gradient_penalty(critic, real, fake, {0.2f, 0.7f}, {w, bias});
  const double wn = std::sqrt(0.36 + 0.64 + 4.0);
  track(pen.value, (wn - 1.0) * (wn - 1.0));

  return {worst < kLossTol, fmt("max |loss - brute| %.2e (< %.0e), CE(uniform, M=8) = %.9f vs ln 8 = %.9f", worst,
                                kLossTol, ce_uniform, std::log(8.0))};
}

Outcome determinism() {
  const auto root = fresh("determinism");
  std::vector<std::string> hashes;
  auto run = [](std::vector<std::string> args) {
    if (cli::run(args) != cli::kExitOk) throw Error("command failed: " + args[0]);
  };
  std::ofstream(root / "train.json") << json{{"pretrain", {{"steps", 50}}}}.dump();
  for (const char* tag : {"a", "b"}) {
    const auto d = root / tag;
    run({"make-toy", "--ids", "10", "--styles", "5", "--size", "64", "--seed", "5", "--out", (d / "toy").string()});
    run({"train", "--config", (root / "train.json").string(), "--data", (d / "toy" / "manifest.json").string(),
         "--steps", std::to_string(kDeterminismTrainSteps), "--seed", "5", "--out", (d / "run").string()});
    run({"generate", "--checkpoint", (d / "run" / "checkpoint.ifg").string(), "--data",
         (d / "toy" / "manifest.json").string(), "--ids", "10", "--styles", "3", "--seed", "6", "--out",
         (d / "gen").string()});
  }
  const auto a = root / "a", b = root / "b";
  const bool toy = manifest_content_hash(load_manifest(a / "toy" / "manifest.json")) ==
                   manifest_content_hash(load_manifest(b / "toy" / "manifest.json"));
  const bool log = slurp(a / "run" / "losses.csv") == slurp(b / "run" / "losses.csv");
  const bool ckpt = slurp(a / "run" / "checkpoint.ifg") == slurp(b / "run" / "checkpoint.ifg");
  const bool gen = manifest_content_hash(load_manifest(a / "gen" / "manifest.json")) ==
                       manifest_content_hash(load_manifest(b / "gen" / "manifest.json")) &&
                   slurp(a / "gen" / "provenance.json") == slurp(b / "gen" / "provenance.json");
  return {toy && log && ckpt && gen,
          fmt("make-toy %s, train(%d steps) log %s checkpoint %s, generate %s", toy ? "identical" : "DIFFERENT",
              kDeterminismTrainSteps, log ? "identical" : "DIFFERENT", ckpt ? "identical" : "DIFFERENT",
              gen ? "identical" : "DIFFERENT")};
}

Outcome matcher_statistics(const Manifest& toy) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto images = load_images(toy);
  std::vector<std::optional<IrisTemplate>> t(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < images.size(); ++i) t[i] = extract_template(images[i]);
  std::vector<double> gen, imp, imp_hd;
  int failed = 0;
  for (const auto& x : t) failed += !x;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      if (!t[i] || !t[j]) continue;
      const double s = match_codes(t[i]->code, t[j]->code);
      if (toy.samples[i].identity_id == toy.samples[j].identity_id) {
        gen.push_back(s);
      } else {
        imp.push_back(s);
        imp_hd.push_back(hamming_distance(t[i]->code, t[j]->code, 0));
      }
    }
  const double gap = mean(gen) - mean(imp), hd = mean(imp_hd), secs = seconds_since(t0);
  return {gap >= kMinGap && std::abs(hd - kImpostorHd) <= kImpostorHdTol && secs < kMatcherSeconds,
          fmt("genuine %.3f - impostor %.3f = %.3f (>= %.2f), impostor HD %.3f (%.1f +- %.1f), %zu/%zu pairs, "
              "%d segmentation failures, %.1fs (< %.0fs)",
              mean(gen), mean(imp), gap, kMinGap, hd, kImpostorHd, kImpostorHdTol, gen.size(), imp.size(), failed,
              secs, kMatcherSeconds)};
}

Outcome quality_scorer() {
  const int uniform = overall_quality(Image(64, 64, 0.5f));
  int clean_ok = 0, blur_lower = 0, n = 100, min_overall = 100;
  double min_circ = 100.0;
#pragma omp parallel for schedule(dynamic) reduction(+ : clean_ok, blur_lower) reduction(min : min_overall, min_circ)
  for (int g = 0; g < n; ++g) {
    const auto r = render_toy_iris(1000 + g / 5, AttributeVector::from_combination(toy_combination_for(g)), 64,
                                   derive_seed(77, g));
    const auto q = assess_quality(r.image);
    clean_ok += q.overall != kQualityFailure && q.overall >= kMinCleanOverall && q.circularity >= kMinCircularity;
    min_overall = std::min(min_overall, q.overall);
    min_circ = std::min(min_circ, q.circularity);
    const auto b = assess_quality(gaussian_blur(r.image, kBlurSigma));
    blur_lower += b.overall == kQualityFailure || b.sharpness < q.sharpness;
  }
  return {uniform == kQualityFailure && clean_ok == n && blur_lower >= kBlurFraction * n,
          fmt("uniform -> %d, clean %d/%d with overall >= %d and circularity >= %.0f (min %d, %.1f), "
              "blur sigma %.0f lowers sharpness %d/%d (>= %.0f%%)",
              uniform, clean_ok, n, kMinCleanOverall, kMinCircularity, min_overall, min_circ, kBlurSigma, blur_lower,
              n, 100 * kBlurFraction)};
}

struct EndToEnd {
  Manifest toy;
  Manifest synth;
  std::vector<ProvenanceEntry> prov;
  UniquenessSummary summary;
  bool pass = false;
  std::string detail;
  std::uint64_t seed = 0;
};

EndToEnd end_to_end_run(std::uint64_t seed) {
  EndToEnd r;
  r.seed = seed;
  const auto root = fresh("e2e_seed" + std::to_string(seed));
  const auto t0 = std::chrono::steady_clock::now();
  r.toy = build_toy_dataset(20, 10, 64, seed, root / "toy");
  auto b = build_models(NetConfig{}, seed);
  pretrain_classifier(*b, r.toy, ClassifierConfig{}, seed);
  TrainConfig tc;
  tc.steps = kTrainSteps;
  tc.seed = seed;
  tc.lr_generator = tc.lr_critic = tc.lr_warp = kLrFast;
  tc.lr_style = tc.lr_identity = kLrEncoders;
  tc.lambda_id_recon = kLambdaIdRecon;
  tc.lambda_id_cls = kLambdaIdCls;
  train(*b, tc, r.toy, root / "run");
  const double minutes = seconds_since(t0) / 60.0;
  r.synth = generate_dataset(*b, r.toy, kMintedIds, kStylesPerId, seed, root / "gen");
  r.prov = load_provenance(root / "gen" / "provenance.json");
  r.summary = uniqueness_experiment(r.toy, r.synth, r.prov, kDefaultPairBudget, seed, root / "uniqueness").summary;
  const auto& s = r.summary;
  const double gap = s.mean_genuine_real - s.mean_impostor_real;
  const double bound = s.mean_genuine_real - kGapFraction * gap;
  const bool below = s.mean_synth_vs_source <= bound;
  const bool imp = std::abs(s.mean_synth_impostor - s.mean_impostor_real) <= kImpostorShift;
  r.pass = below && imp && minutes <= kTrainMinutes;
  r.detail = fmt("seed %llu: synth-vs-source %.3f <= %.3f (real genuine %.3f, impostor %.3f), synth impostor %.3f "
                 "within %.1f of %.3f, synth genuine %.3f, %zu synth segmentation failures, training %d steps in "
                 "%.1f min (<= %.0f)",
                 static_cast<unsigned long long>(seed), s.mean_synth_vs_source, bound, s.mean_genuine_real,
                 s.mean_impostor_real, s.mean_synth_impostor, kImpostorShift, s.mean_impostor_real,
                 s.mean_synth_genuine, s.failed_synth, kTrainSteps, minutes, kTrainMinutes);
  return r;
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  const Manifest toy = build_toy_dataset(20, 10, 64, 1, kWork / "toy20x10");

  report(1, "warp math", warp_math);
  report(2, "attribute codec", attribute_codec);
  report(3, "freeze contracts", [&] { return freeze_contracts(toy); });
  report(4, "loss oracles", loss_oracles);
  report(5, "determinism", determinism);
  report(6, "matcher statistics", [&] { return matcher_statistics(toy); });
  report(7, "quality scorer", quality_scorer);

  EndToEnd e2e;
  report(8, "uniqueness of generated identities", [&] {
    std::string attempts;
    for (int attempt = 0; attempt <= kRetries; ++attempt) {
      e2e = end_to_end_run(101 + attempt);
      attempts += (attempt ? " | " : "") + e2e.detail;
      if (e2e.pass) break;
    }
    return Outcome{e2e.pass, attempts};
  });
  report(9, "rejection of generated images", [&] {
    if (e2e.synth.samples.empty()) return Outcome{false, "no generated set"};
    const auto q = quality_experiment(e2e.synth, kWork / "quality");
    return Outcome{q.rejection_rate <= kMaxRejection,
                   fmt("%.1f%% of %zu rejected (<= %.0f%%)", 100 * q.rejection_rate, q.overall.size(),
                       100 * kMaxRejection)};
  });
  report(10, "utility experiment contract", [&] {
    if (e2e.synth.samples.empty()) return Outcome{false, "no generated set"};
    auto [train_part, test_part] = split_dataset(e2e.toy, 0.7, e2e.seed);
    const auto out = fresh("utility");
    const auto r = utility_experiment(train_part, e2e.synth, test_part, UtilityConfig{}, e2e.seed, out);
    const bool files = fs::exists(out / "roc_real.csv") && fs::exists(out / "roc_real_synth.csv") &&
                       fs::exists(out / "utility_report.json");
    const bool budgets = r.real_only.train_images == train_part.samples.size() &&
                         r.real_synth.train_images == train_part.samples.size() + e2e.synth.samples.size();
    return Outcome{files && budgets,
                   fmt("TAR@FAR0.1 real %.3f, real+synth %.3f (delta %+.3f); TAR@FAR0.01 real %.3f, real+synth %.3f "
                       "(delta %+.3f); ROC files %s",
                       r.real_only.tar_far_01, r.real_synth.tar_far_01, r.delta_far_01, r.real_only.tar_far_001,
                       r.real_synth.tar_far_001, r.delta_far_001, files ? "written" : "missing")};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
