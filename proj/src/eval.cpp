#include "irisforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>

#include "irisforge/error.hpp"
#include "irisforge/irisproc.hpp"
#include "irisforge/json_io.hpp"
#include "irisforge/util.hpp"

namespace irisforge {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

using Pair = std::pair<std::size_t, std::size_t>;

std::vector<Pair> sample_pairs(std::vector<Pair> all, std::size_t budget, std::uint64_t seed) {
  if (all.size() <= budget) return all;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, all.size() - 1)(rng);
    std::swap(all[i], all[j]);
  }
  all.resize(budget);
  return all;
}

std::vector<std::optional<IrisCode>> templates(const Manifest& m, bool use_circles) {
  const auto images = load_images(m);
  std::vector<std::optional<IrisCode>> out(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& s = m.samples[i];
    auto t = use_circles && s.pupil && s.limbus ? extract_template(images[i], s.pupil, s.limbus)
                                                : extract_template(images[i]);
    if (t) out[i] = std::move(t->code);
  }
  return out;
}

struct ScoredPair {
  std::size_t a, b;
  double score;
};

// Pairs whose codes never overlap are dropped.
std::vector<ScoredPair> score_pairs(const std::vector<Pair>& pairs, const std::vector<std::optional<IrisCode>>& ta,
                                    const std::vector<std::optional<IrisCode>>& tb) {
  std::vector<double> s(pairs.size(), -1.0);
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    try {
      s[k] = match_codes(*ta[pairs[k].first], *tb[pairs[k].second]);
    } catch (const NoOverlap&) {
    }
  }
  std::vector<ScoredPair> out;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (s[k] >= 0.0) out.push_back({pairs[k].first, pairs[k].second, s[k]});
  return out;
}

std::vector<double> scores_of(const std::vector<ScoredPair>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& p : v) out.push_back(p.score);
  return out;
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoredPair>& v, const Manifest& ma,
                  const Manifest& mb) {
  auto f = open_out(path);
  f << "a,b,similarity\n";
  char buf[32];
  for (const auto& p : v) {
    std::snprintf(buf, sizeof buf, "%.9g", p.score);
    f << ma.samples[p.a].image_path << ',' << mb.samples[p.b].image_path << ',' << buf << '\n';
  }
}

void write_histogram(const std::filesystem::path& path, const std::vector<HistogramBin>& bins,
                     std::optional<std::size_t> failed = std::nullopt) {
  auto f = open_out(path);
  f << "bin_lo,bin_hi,count\n";
  for (const auto& b : bins) f << b.lo << ',' << b.hi << ',' << b.count << '\n';
  if (failed) f << "255,255," << *failed << '\n';
}

std::vector<double> euclidean(const std::vector<std::vector<double>>& f, const std::vector<Pair>& pairs) {
  std::vector<double> d(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    double s = 0.0;
    const auto& a = f[pairs[k].first];
    const auto& b = f[pairs[k].second];
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    d[k] = std::sqrt(s);
  }
  return d;
}

}  // namespace

std::vector<HistogramBin> histogram(const std::vector<double>& scores, int bins, double lo, double hi) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (!(hi > lo)) throw ConfigError("histogram range must be non-empty");
  std::vector<HistogramBin> out(bins);
  const double w = (hi - lo) / bins;
  for (int i = 0; i < bins; ++i) out[i] = {lo + i * w, i + 1 == bins ? hi : lo + (i + 1) * w, 0};
  for (double s : scores) {
    const int i = std::clamp(static_cast<int>(std::floor((s - lo) / w)), 0, bins - 1);
    ++out[i].count;
  }
  return out;
}

std::vector<HistogramBin> emit_histogram(const std::vector<double>& scores, int bins, const std::filesystem::path& path,
                                         double lo, double hi) {
  auto h = histogram(scores, bins, lo, hi);
  write_histogram(path, h);
  return h;
}

QualityResult quality_experiment(const Manifest& m, const std::filesystem::path& out_dir) {
  if (m.samples.empty()) throw InsufficientData("quality experiment needs a nonempty manifest");
  const auto images = load_images(m);
  const std::size_t n = images.size();
  QualityResult r;
  r.overall.assign(n, 255);
  std::vector<char> rejected(n, 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    r.overall[i] = overall_quality(images[i]);
    rejected[i] = r.overall[i] == 255 || !extract_template(images[i]);
  }
  r.rejected.assign(rejected.begin(), rejected.end());
  std::vector<double> scored;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.overall[i] == 255)
      ++r.failed_bucket;
    else
      scored.push_back(r.overall[i]);
  }
  r.histogram = histogram(scored, 10, 0.0, 100.0);
  r.rejection_rate = static_cast<double>(std::count(rejected.begin(), rejected.end(), 1)) / static_cast<double>(n);

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    auto f = open_out(out_dir / "quality.csv");
    f << "path,overall,rejected\n";
    for (std::size_t i = 0; i < n; ++i)
      f << m.samples[i].image_path << ',' << r.overall[i] << ',' << (r.rejected[i] ? 1 : 0) << '\n';
    write_histogram(out_dir / "hist_quality.csv", r.histogram, r.failed_bucket);
  }
  return r;
}

UniquenessResult uniqueness_experiment(const Manifest& real, const Manifest& synth,
                                       const std::vector<ProvenanceEntry>& provenance, std::size_t pairs_budget,
                                       std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (real.samples.empty() || synth.samples.empty()) throw InsufficientData("uniqueness needs nonempty manifests");
  const auto tr = templates(real, true);
  const auto ts = templates(synth, false);
  UniquenessResult r;
  r.summary.failed_real = static_cast<std::size_t>(std::count(tr.begin(), tr.end(), std::nullopt));
  r.summary.failed_synth = static_cast<std::size_t>(std::count(ts.begin(), ts.end(), std::nullopt));

  auto within = [](const Manifest& m, const std::vector<std::optional<IrisCode>>& t, bool same) {
    std::vector<Pair> out;
    for (std::size_t i = 0; i < m.samples.size(); ++i)
      for (std::size_t j = i + 1; j < m.samples.size(); ++j)
        if (t[i] && t[j] && (m.samples[i].identity_id == m.samples[j].identity_id) == same) out.emplace_back(i, j);
    return out;
  };

  std::map<std::string, std::size_t> real_by_path;
  for (std::size_t i = 0; i < real.samples.size(); ++i) real_by_path.emplace(real.samples[i].image_path, i);
  std::map<std::int64_t, std::size_t> source_of;
  for (const auto& p : provenance) {
    const auto it = real_by_path.find(p.source_path);
    if (it != real_by_path.end()) source_of[p.identity_id] = it->second;
  }
  std::vector<Pair> cross;
  bool any_source = false;
  for (std::size_t i = 0; i < synth.samples.size(); ++i) {
    const auto it = source_of.find(synth.samples[i].identity_id);
    if (it == source_of.end()) continue;
    any_source = true;
    if (ts[i] && tr[it->second]) cross.emplace_back(i, it->second);
  }
  if (!any_source) throw InsufficientData("provenance names no source image of the real manifest");

  const auto gr = score_pairs(sample_pairs(within(real, tr, true), pairs_budget, derive_seed(seed, 1)), tr, tr);
  const auto ir = score_pairs(sample_pairs(within(real, tr, false), pairs_budget, derive_seed(seed, 2)), tr, tr);
  const auto sv = score_pairs(sample_pairs(cross, pairs_budget, derive_seed(seed, 3)), ts, tr);
  const auto gs = score_pairs(sample_pairs(within(synth, ts, true), pairs_budget, derive_seed(seed, 4)), ts, ts);
  const auto is = score_pairs(sample_pairs(within(synth, ts, false), pairs_budget, derive_seed(seed, 5)), ts, ts);

  r.scores = {scores_of(gr), scores_of(ir), scores_of(sv), scores_of(gs), scores_of(is)};
  r.summary.mean_genuine_real = mean(r.scores.genuine_real);
  r.summary.mean_impostor_real = mean(r.scores.impostor_real);
  r.summary.mean_synth_vs_source = mean(r.scores.synth_vs_source);
  r.summary.mean_synth_genuine = mean(r.scores.synth_genuine);
  r.summary.mean_synth_impostor = mean(r.scores.synth_impostor);

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const std::pair<const char*, const std::vector<ScoredPair>*> sets[] = {
        {"genuine_real", &gr}, {"impostor_real", &ir}, {"synth_vs_source", &sv},
        {"synth_genuine", &gs}, {"synth_impostor", &is}};
    for (const auto& [name, v] : sets) {
      const std::string n(name);
      const bool a_synth = n.rfind("synth", 0) == 0;
      const bool b_synth = a_synth && n != "synth_vs_source";
      write_scores(out_dir / ("scores_" + n + ".csv"), *v, a_synth ? synth : real, b_synth ? synth : real);
      emit_histogram(scores_of(*v), 20, out_dir / ("hist_" + n + ".csv"));
    }
    const auto& s = r.summary;
    json j{{"mean_genuine_real", s.mean_genuine_real},
           {"mean_impostor_real", s.mean_impostor_real},
           {"mean_synth_vs_source", s.mean_synth_vs_source},
           {"mean_synth_genuine", s.mean_synth_genuine},
           {"mean_synth_impostor", s.mean_synth_impostor},
           {"pairs",
            {{"genuine_real", gr.size()},
             {"impostor_real", ir.size()},
             {"synth_vs_source", sv.size()},
             {"synth_genuine", gs.size()},
             {"synth_impostor", is.size()}}},
           {"failed_real", s.failed_real},
           {"failed_synth", s.failed_synth},
           {"pairs_budget", pairs_budget},
           {"seed", seed}};
    open_out(out_dir / "uniqueness_summary.json") << j.dump(1) << '\n';
  }
  return r;
}

std::vector<RocPoint> roc_curve(const std::vector<double>& genuine_dist, const std::vector<double>& impostor_dist) {
  if (genuine_dist.empty() || impostor_dist.empty()) throw InsufficientData("ROC needs genuine and impostor scores");
  std::vector<double> g = genuine_dist, im = impostor_dist, t;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::merge(g.begin(), g.end(), im.begin(), im.end(), std::back_inserter(t));
  t.erase(std::unique(t.begin(), t.end()), t.end());
  std::vector<RocPoint> out;
  out.reserve(t.size());
  for (double th : t) {
    const auto ng = std::upper_bound(g.begin(), g.end(), th) - g.begin();
    const auto ni = std::upper_bound(im.begin(), im.end(), th) - im.begin();
    out.push_back({th, static_cast<double>(ni) / im.size(), static_cast<double>(ng) / g.size()});
  }
  return out;
}

Manifest merge_manifests(const Manifest& a, const Manifest& b) {
  if (a.image_size != b.image_size) throw ConfigError("cannot merge manifests with different image sizes");
  Manifest out;
  out.image_size = a.image_size;
  out.seed = a.seed;
  for (const Manifest* m : {&a, &b})
    for (const auto& s : m->samples) {
      IrisSample c = s;
      c.image_path = std::filesystem::absolute(m->resolve(s)).string();
      out.samples.push_back(std::move(c));
    }
  return out;
}

UtilityReport utility_experiment(const Manifest& real_train, const Manifest& synth_train, const Manifest& test,
                                 const UtilityConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir) {
  const auto train_ids = real_train.identities();
  const auto test_ids = test.identities();
  if (test_ids.size() < 2) throw InsufficientData("utility test split needs at least two identities");
  for (auto id : test_ids)
    if (std::binary_search(train_ids.begin(), train_ids.end(), id))
      throw ConfigError("test identity " + std::to_string(id) + " also appears in real training data");

  const auto test_images = load_images(test);
  std::vector<Pair> gen_pairs, imp_pairs;
  for (std::size_t i = 0; i < test.samples.size(); ++i)
    for (std::size_t j = i + 1; j < test.samples.size(); ++j)
      (test.samples[i].identity_id == test.samples[j].identity_id ? gen_pairs : imp_pairs).emplace_back(i, j);
  if (gen_pairs.empty()) throw InsufficientData("utility test split has no genuine pairs");

  auto run_arm = [&](const std::string& name, const Manifest& train) {
    auto b = build_models(cfg.net, seed);
    pretrain_classifier(*b, train, cfg.classifier, seed);
    std::vector<std::vector<double>> feats(test_images.size());
    {
      InferenceGuard guard(*b);
#pragma omp parallel for schedule(static)
      for (std::size_t i = 0; i < test_images.size(); ++i) feats[i] = classifier_features(*b, test_images[i]);
    }
    const auto gd = euclidean(feats, gen_pairs);
    const auto id = euclidean(feats, imp_pairs);
    UtilityArm arm;
    arm.name = name;
    arm.train_images = train.samples.size();
    arm.tar_far_01 = tar_at_far(gd, id, 0.1);
    arm.tar_far_001 = tar_at_far(gd, id, 0.01);
    arm.genuine_mean = mean(gd);
    arm.impostor_mean = mean(id);
    if (!out_dir.empty()) {
      auto f = open_out(out_dir / ("roc_" + name + ".csv"));
      f << "threshold,far,tar\n";
      char buf[96];
      for (const auto& p : roc_curve(gd, id)) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", p.threshold, p.far, p.tar);
        f << buf;
      }
    }
    return arm;
  };

  if (!out_dir.empty()) ensure_dir(out_dir);
  UtilityReport r;
  r.real_only = run_arm("real", real_train);
  r.real_synth = run_arm("real_synth", merge_manifests(real_train, synth_train));
  r.delta_far_01 = r.real_synth.tar_far_01 - r.real_only.tar_far_01;
  r.delta_far_001 = r.real_synth.tar_far_001 - r.real_only.tar_far_001;

  if (!out_dir.empty()) {
    auto arm_json = [](const UtilityArm& a) {
      return json{{"train_images", a.train_images},
                  {"tar_at_far_0.1", a.tar_far_01},
                  {"tar_at_far_0.01", a.tar_far_001},
                  {"genuine_mean_distance", a.genuine_mean},
                  {"impostor_mean_distance", a.impostor_mean}};
    };
    auto sign = [](double d) { return d > 0 ? "improved" : d < 0 ? "worse" : "unchanged"; };
    json j{{"real", arm_json(r.real_only)},
           {"real_synth", arm_json(r.real_synth)},
           {"delta_tar_at_far_0.1", r.delta_far_01},
           {"delta_tar_at_far_0.01", r.delta_far_001},
           {"direction_far_0.1", sign(r.delta_far_01)},
           {"direction_far_0.01", sign(r.delta_far_001)},
           {"classifier_steps", cfg.classifier.steps},
           {"triplets_per_step", cfg.classifier.triplets},
           {"test_genuine_pairs", gen_pairs.size()},
           {"test_impostor_pairs", imp_pairs.size()},
           {"seed", seed}};
    open_out(out_dir / "utility_report.json") << j.dump(1) << '\n';
  }
  return r;
}

}  // namespace irisforge
