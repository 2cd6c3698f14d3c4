#include "irisforge/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "irisforge/error.hpp"
#include "irisforge/json_io.hpp"
#include "irisforge/nn/ops.hpp"
#include "irisforge/util.hpp"

namespace irisforge {

using nn::Tensor;
using nn::Var;

namespace {

constexpr float kLeak = 0.2f;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) { return std::mt19937_64(derive_seed(seed, index)); }

Var rows_var(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  const int d = n ? static_cast<int>(rows[0].size()) : 0;
  Tensor t({n, d});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) t[i * d + k] = static_cast<float>(rows[i][k]);
  return nn::constant(std::move(t));
}

std::vector<double> row_of(const Tensor& t, int r) {
  const int d = t.dim(1);
  return {t.values().begin() + r * d, t.values().begin() + (r + 1) * d};
}

}  // namespace

void NetConfig::validate() const {
  if (image_size < 64 || (image_size & (image_size - 1)) != 0)
    throw ConfigError("image_size must be a power of two >= 64");
  if (latent_dim < 8 || style_dim < 8) throw ConfigError("latent and style dims must be >= 8");
  for (int c : channels)
    if (c < 1) throw ConfigError("channel widths must be positive");
  if (warps < 1 || rbfs < 1) throw ConfigError("warp counts must be positive");
  if (feature_dim < 2 || recon_hidden < 1) throw ConfigError("feature_dim and recon_hidden must be positive");
}

void to_json(json& j, const NetConfig& c) {
  j = json{{"image_size", c.image_size}, {"latent_dim", c.latent_dim}, {"style_dim", c.style_dim},
           {"channels", c.channels},     {"warps", c.warps},           {"rbfs", c.rbfs},
           {"feature_dim", c.feature_dim}, {"recon_hidden", c.recon_hidden}};
}

void from_json(const json& j, NetConfig& c) {
  static const std::set<std::string> known{"image_size", "latent_dim", "style_dim", "channels",
                                           "warps",      "rbfs",       "feature_dim", "recon_hidden"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown network config key: " + k);
  c.image_size = j.value("image_size", c.image_size);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.style_dim = j.value("style_dim", c.style_dim);
  if (j.contains("channels")) c.channels = j.at("channels").get<std::array<int, 4>>();
  c.warps = j.value("warps", c.warps);
  c.rbfs = j.value("rbfs", c.rbfs);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.recon_hidden = j.value("recon_hidden", c.recon_hidden);
}

ConvTrunk::ConvTrunk(nn::ParameterSet& ps, const std::string& name, int in_channels, const NetConfig& cfg,
                     std::mt19937_64& rng) {
  int in = in_channels;
  for (int i = 0; i < 4; ++i) {
    convs[i] = nn::Conv2d(ps, name + ".conv" + std::to_string(i), in, cfg.channels[i], 4, 2, 1, rng);
    in = cfg.channels[i];
  }
}

Var ConvTrunk::operator()(const Var& x) const {
  Var h = x;
  for (const auto& c : convs) h = nn::leaky_relu(c(h), kLeak);
  const auto& s = h->value.shape();
  return nn::reshape(h, {s[0], s[1] * s[2] * s[3]});
}

Var StyleEncoder::operator()(const Var& x, const Var& y) const {
  return nn::tanh(head(trunk(nn::attach_planes(x, y))));
}

Var IdentityEncoder::operator()(const Var& x) const { return nn::tanh(head(trunk(x))); }

Var Generator::operator()(const Var& d, const Var& s) const {
  Var h = nn::relu(fc(nn::concat_features(d, s)));
  h = nn::reshape(h, {h->value.dim(0), channels, bottleneck, bottleneck});
  for (int i = 0; i < 3; ++i) h = nn::relu(norms[i](ups[i](h)));
  return nn::tanh(ups[3](h));
}

Discriminator::Out Discriminator::operator()(const Var& x) const {
  const Var f = trunk(x);
  return {realness(f), attributes(f)};
}

Var Classifier::operator()(const Var& x) const { return nn::l2_normalize(head(trunk(x))); }

WarpParams WarpNetwork::params() const {
  const auto& cs = centers->value;
  WarpParams p(cs.dim(0), cs.dim(1), cs.dim(2));
  for (std::size_t i = 0; i < p.centers.size(); ++i) p.centers[i] = cs[i];
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    p.weights[i] = weights->value[i];
    p.scales[i] = softplus(raw_scales->value[i]);
  }
  return p;
}

Var WarpNetwork::shift(const Var& z, const std::vector<int>& ms, const std::vector<double>& eps) const {
  const int n = z->value.dim(0);
  const int d = z->value.dim(1);
  if (static_cast<int>(ms.size()) != n || static_cast<int>(eps.size()) != n)
    throw ShapeError("warp shift: one (m, eps) per row");
  const WarpParams p = params();
  if (d != p.dim) throw ShapeError("warp shift: code dimension mismatch");
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    const auto zi = row_of(z->value, i);
    const auto zb = shift_code(p, ms[i], zi, eps[i]);
    for (int k = 0; k < d; ++k) out[i * d + k] = static_cast<float>(zb[k]);
  }
  auto node = std::make_shared<nn::Node>();
  node->value = std::move(out);
  node->requires_grad = z->requires_grad || centers->requires_grad;
  if (!node->requires_grad) return node;
  node->parents = {z, centers, weights, raw_scales};
  node->backward_fn = [p, ms, eps, n, d](nn::Node& self) {
    const Var& zv = self.parents[0];
    WarpGrads grads(p);
    std::vector<double> gz(static_cast<std::size_t>(n) * d, 0.0);
    for (int i = 0; i < n; ++i) {
      const auto zi = row_of(zv->value, i);
      std::vector<double> up(d);
      for (int k = 0; k < d; ++k) up[k] = self.grad[i * d + k];
      shift_code_backward(p, ms[i], zi, eps[i], up, std::span<double>(gz).subspan(static_cast<std::size_t>(i) * d, d),
                          grads);
    }
    if (zv->requires_grad) {
      auto g = zv->ensure_grad().data();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += static_cast<float>(gz[k]);
    }
    const Var& cv = self.parents[1];
    const Var& wv = self.parents[2];
    const Var& rv = self.parents[3];
    if (cv->requires_grad) {
      auto g = cv->ensure_grad().data();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += static_cast<float>(grads.centers[k]);
    }
    if (wv->requires_grad) {
      auto g = wv->ensure_grad().data();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += static_cast<float>(grads.weights[k]);
    }
    if (rv->requires_grad) {
      auto g = rv->ensure_grad().data();
      for (std::size_t k = 0; k < g.size(); ++k)
        g[k] += static_cast<float>(grads.scales[k] * sigmoid(rv->value[k]));
    }
  };
  return node;
}

WarpNetwork::Recon WarpNetwork::reconstruct(const Var& z, const Var& z_bar) const {
  const Var h = nn::relu(recon_hidden(nn::concat_features(z, z_bar)));
  return {recon_logits(h), recon_eps(h)};
}

std::vector<nn::ParameterSet*> ModelBundle::parameter_sets() {
  return {&style_params, &identity_params, &warp_params, &generator_params, &critic_params, &classifier_params};
}

std::vector<const nn::ParameterSet*> ModelBundle::parameter_sets() const {
  return {&style_params, &identity_params, &warp_params, &generator_params, &critic_params, &classifier_params};
}

std::vector<std::string> ModelBundle::set_names() const {
  return {"style_encoder", "identity_encoder", "warp", "generator", "critic", "classifier"};
}

std::uint64_t ModelBundle::hash() const {
  std::uint64_t h = 0;
  for (const auto* ps : parameter_sets()) h = derive_seed(h, ps->hash());
  return h;
}

void ModelBundle::freeze_classifier() {
  classifier_params.set_trainable(false);
  classifier_frozen = true;
}

std::unique_ptr<ModelBundle> build_models(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto b = std::make_unique<ModelBundle>();
  b->cfg = cfg;
  const int flat = cfg.channels[3] * cfg.bottleneck() * cfg.bottleneck();

  {
    auto rng = stream(seed, 1);
    b->style_encoder.trunk = ConvTrunk(b->style_params, "style_encoder", 1 + kAttributeBits, cfg, rng);
    b->style_encoder.head = nn::Linear(b->style_params, "style_encoder.head", flat, cfg.style_dim, rng);
  }
  {
    auto rng = stream(seed, 2);
    b->identity_encoder.trunk = ConvTrunk(b->identity_params, "identity_encoder", 1, cfg, rng);
    b->identity_encoder.head = nn::Linear(b->identity_params, "identity_encoder.head", flat, cfg.latent_dim, rng);
  }
  {
    const WarpParams wp = init_warp_params(cfg.warps, cfg.rbfs, cfg.latent_dim, derive_seed(seed, 3));
    Tensor c({cfg.warps, cfg.rbfs, cfg.latent_dim}), w({cfg.warps, cfg.rbfs}), r({cfg.warps, cfg.rbfs});
    for (std::size_t i = 0; i < wp.centers.size(); ++i) c[i] = static_cast<float>(wp.centers[i]);
    for (std::size_t i = 0; i < wp.weights.size(); ++i) {
      w[i] = static_cast<float>(wp.weights[i]);
      r[i] = static_cast<float>(softplus_inverse(wp.scales[i]));
    }
    auto& W = b->warp;
    W.centers = b->warp_params.add("warp.centers", std::move(c));
    W.weights = b->warp_params.add("warp.weights", std::move(w));
    W.raw_scales = b->warp_params.add("warp.raw_scales", std::move(r));
    auto rng = stream(seed, 4);
    W.recon_hidden = nn::Linear(b->warp_params, "warp.recon.hidden", 2 * cfg.latent_dim, cfg.recon_hidden, rng, 1.4142f);
    W.recon_logits = nn::Linear(b->warp_params, "warp.recon.logits", cfg.recon_hidden, cfg.warps, rng);
    W.recon_eps = nn::Linear(b->warp_params, "warp.recon.eps", cfg.recon_hidden, 1, rng);
  }
  {
    auto rng = stream(seed, 5);
    auto& G = b->generator;
    G.channels = cfg.channels[3];
    G.bottleneck = cfg.bottleneck();
    G.fc = nn::Linear(b->generator_params, "generator.fc", cfg.latent_dim + cfg.style_dim, flat, rng, 1.4142f);
    const int chans[5] = {cfg.channels[3], cfg.channels[2], cfg.channels[1], cfg.channels[0], 1};
    for (int i = 0; i < 4; ++i) {
      G.ups[i] = nn::ConvTranspose2d(b->generator_params, "generator.up" + std::to_string(i), chans[i], chans[i + 1],
                                     4, 2, 1, rng, i == 3 ? 1.0f : 1.4142f);
      if (i < 3) G.norms[i] = nn::InstanceNorm(b->generator_params, "generator.norm" + std::to_string(i), chans[i + 1]);
    }
  }
  {
    auto rng = stream(seed, 6);
    b->critic.trunk = ConvTrunk(b->critic_params, "critic", 1, cfg, rng);
    b->critic.realness = nn::Linear(b->critic_params, "critic.realness", flat, 1, rng);
    b->critic.attributes = nn::Linear(b->critic_params, "critic.attributes", flat, kAttributeBits, rng);
  }
  {
    auto rng = stream(seed, 7);
    b->classifier.trunk = ConvTrunk(b->classifier_params, "classifier", 1, cfg, rng);
    b->classifier.head = nn::Linear(b->classifier_params, "classifier.head", flat, cfg.feature_dim, rng);
  }
  return b;
}

Tensor images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) return Tensor({0, 1, 0, 0});
  const int h = images[0].height, w = images[0].width;
  Tensor t({static_cast<int>(images.size()), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != w || images[i].height != h) throw ShapeError("images differ in size");
    const auto v = to_signed(images[i]);
    std::copy(v.begin(), v.end(), t.values().begin() + i * static_cast<std::size_t>(h) * w);
  }
  return t;
}

Tensor image_to_tensor(const Image& image) { return images_to_tensor({image}); }

Image tensor_to_image(const Tensor& t, int index) {
  const int h = t.dim(2), w = t.dim(3);
  const auto begin = t.values().begin() + static_cast<std::size_t>(index) * h * w;
  return from_signed(std::vector<float>(begin, begin + static_cast<std::size_t>(h) * w), w, h);
}

Tensor attributes_to_tensor(const std::vector<AttributeVector>& ys) {
  Tensor t({static_cast<int>(ys.size()), kAttributeBits});
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (int k = 0; k < kAttributeBits; ++k) t[i * kAttributeBits + k] = ys[i].bits()[k] ? 1.0f : 0.0f;
  return t;
}

namespace {

void check_image(const ModelBundle& b, const Image& image) {
  if (image.width != b.cfg.image_size || image.height != b.cfg.image_size)
    throw ShapeError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     ", network expects " + std::to_string(b.cfg.image_size));
}

}  // namespace

std::vector<double> encode_style(const ModelBundle& b, const Image& image, const AttributeVector& y) {
  check_image(b, image);
  const auto s = b.style_encoder(nn::constant(image_to_tensor(image)), nn::constant(attributes_to_tensor({y})));
  return row_of(s->value, 0);
}

IdentityCodes encode_identity(const ModelBundle& b, const Image& image, int m, double eps) {
  check_image(b, image);
  IdentityCodes c;
  c.z = row_of(b.identity_encoder(nn::constant(image_to_tensor(image)))->value, 0);
  c.z_bar = shift_code(b.warp.params(), m, c.z, eps);
  return c;
}

Image generate(const ModelBundle& b, std::span<const double> d, std::span<const double> s) {
  if (static_cast<int>(d.size()) != b.cfg.latent_dim || static_cast<int>(s.size()) != b.cfg.style_dim)
    throw ShapeError("identity/style code dimension mismatch");
  const auto x = b.generator(rows_var({{d.begin(), d.end()}}), rows_var({{s.begin(), s.end()}}));
  return tensor_to_image(x->value);
}

std::vector<double> classifier_features(const ModelBundle& b, const Image& image) {
  check_image(b, image);
  return row_of(b.classifier(nn::constant(image_to_tensor(image)))->value, 0);
}

std::vector<Image> load_images(const Manifest& m) {
  std::vector<Image> out(m.samples.size());
  std::vector<std::string> errors(m.samples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    try {
      out[i] = load_png(m.resolve(m.samples[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw LoadError(e);
  return out;
}

double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double margin) {
  double dp = 0.0, dn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dp += (a[i] - p[i]) * (a[i] - p[i]);
    dn += (a[i] - n[i]) * (a[i] - n[i]);
  }
  return std::max(0.0, dp - dn + margin);
}

double tar_at_far(std::vector<double> genuine, std::vector<double> impostor, double far) {
  if (genuine.empty() || impostor.empty()) throw InsufficientData("need genuine and impostor scores");
  std::sort(impostor.begin(), impostor.end());
  const std::size_t k = static_cast<std::size_t>(std::floor(far * impostor.size() + 1e-12));
  if (k >= impostor.size()) return 1.0;
  const double threshold = impostor[k];  // accept strictly below: at most k impostors pass
  const auto accepted = std::count_if(genuine.begin(), genuine.end(), [&](double d) { return d < threshold; });
  return static_cast<double>(accepted) / genuine.size();
}

ClassifierReport pretrain_classifier(ModelBundle& b, const Manifest& train, const ClassifierConfig& cfg,
                                     std::uint64_t seed) {
  const auto ids = train.identities();
  if (ids.size() < 2) throw InsufficientData("classifier pretraining needs at least two identities");
  const auto images = load_images(train);
  for (const auto& img : images) check_image(b, img);

  std::map<std::int64_t, std::vector<int>> fit, held;
  {
    std::map<std::int64_t, int> seen;
    for (int i = 0; i < static_cast<int>(train.samples.size()); ++i) {
      const auto id = train.samples[i].identity_id;
      const int k = seen[id]++;
      (cfg.holdout_every > 0 && k % cfg.holdout_every == cfg.holdout_every - 1 ? held : fit)[id].push_back(i);
    }
  }
  std::vector<std::int64_t> anchors;
  for (const auto& [id, v] : fit)
    if (v.size() >= 2) anchors.push_back(id);
  if (anchors.empty() || fit.size() < 2) throw InsufficientData("need two samples for some identity and two identities");

  b.classifier_params.set_trainable(true);
  b.classifier_frozen = false;
  nn::Adam opt(b.classifier_params, nn::AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f});
  std::mt19937_64 rng(derive_seed(seed, 0xC1A55));
  const int t = cfg.triplets;
  const int hw = b.cfg.image_size * b.cfg.image_size;
  ClassifierReport report;

  for (int step = 0; step < cfg.steps; ++step) {
    Tensor batch({3 * t, 1, b.cfg.image_size, b.cfg.image_size});
    for (int k = 0; k < t; ++k) {
      const auto aid = anchors[std::uniform_int_distribution<std::size_t>(0, anchors.size() - 1)(rng)];
      const auto& pool = fit[aid];
      const std::size_t ai = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
      std::size_t pi = std::uniform_int_distribution<std::size_t>(0, pool.size() - 2)(rng);
      if (pi >= ai) ++pi;
      std::int64_t nid = aid;
      while (nid == aid) {
        auto it = fit.begin();
        std::advance(it, std::uniform_int_distribution<std::size_t>(0, fit.size() - 1)(rng));
        nid = it->first;
      }
      const auto& npool = fit[nid];
      const int ni = npool[std::uniform_int_distribution<std::size_t>(0, npool.size() - 1)(rng)];
      const int src[3] = {pool[ai], pool[pi], ni};
      for (int j = 0; j < 3; ++j) {
        const auto v = to_signed(images[src[j]]);
        std::copy(v.begin(), v.end(), batch.values().begin() + static_cast<std::size_t>(j * t + k) * hw);
      }
    }
    b.classifier_params.zero_grad();
    const Var f = b.classifier(nn::constant(std::move(batch)));
    const int fd = b.cfg.feature_dim;
    Tensor g(f->value.shape());
    double total = 0.0;
    for (int k = 0; k < t; ++k) {
      const float* a = &f->value[k * fd];
      const float* p = &f->value[(t + k) * fd];
      const float* n = &f->value[(2 * t + k) * fd];
      double dp = 0.0, dn = 0.0;
      for (int i = 0; i < fd; ++i) dp += (a[i] - p[i]) * (a[i] - p[i]), dn += (a[i] - n[i]) * (a[i] - n[i]);
      const double l = dp - dn + cfg.margin;
      if (l <= 0.0) continue;
      total += l;
      for (int i = 0; i < fd; ++i) {
        g[k * fd + i] += static_cast<float>(2.0 * ((a[i] - p[i]) - (a[i] - n[i])) / t);
        g[(t + k) * fd + i] += static_cast<float>(-2.0 * (a[i] - p[i]) / t);
        g[(2 * t + k) * fd + i] += static_cast<float>(2.0 * (a[i] - n[i]) / t);
      }
    }
    const Var loss = nn::external_loss({f}, total / t, {g});
    if (!std::isfinite(loss->value[0])) throw NonFiniteLoss("classifier triplet loss is not finite");
    nn::backward(loss);
    opt.step();
    report.final_loss = total / t;
  }
  b.freeze_classifier();

  // Verification on the held-out slice; fall back to all samples when it has no genuine pairs.
  std::vector<int> eval;
  for (const auto& [id, v] : held) eval.insert(eval.end(), v.begin(), v.end());
  bool has_genuine = std::any_of(held.begin(), held.end(), [](const auto& kv) { return kv.second.size() >= 2; });
  if (!has_genuine) {
    eval.resize(train.samples.size());
    std::iota(eval.begin(), eval.end(), 0);
  }
  std::sort(eval.begin(), eval.end());
  std::vector<std::vector<double>> feats(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) feats[i] = classifier_features(b, images[eval[i]]);
  std::vector<double> gen, imp;
  for (std::size_t i = 0; i < eval.size(); ++i)
    for (std::size_t j = i + 1; j < eval.size(); ++j) {
      double d = 0.0;
      for (int k = 0; k < b.cfg.feature_dim; ++k) d += (feats[i][k] - feats[j][k]) * (feats[i][k] - feats[j][k]);
      d = std::sqrt(d);
      (train.samples[eval[i]].identity_id == train.samples[eval[j]].identity_id ? gen : imp).push_back(d);
    }
  report.train_samples = static_cast<int>(train.samples.size() - (has_genuine ? eval.size() : 0));
  report.heldout_samples = has_genuine ? static_cast<int>(eval.size()) : 0;
  if (!gen.empty() && !imp.empty()) {
    report.genuine_mean_distance = std::accumulate(gen.begin(), gen.end(), 0.0) / gen.size();
    report.impostor_mean_distance = std::accumulate(imp.begin(), imp.end(), 0.0) / imp.size();
    report.tar_at_far10 = tar_at_far(gen, imp, 0.1);
  }
  return report;
}

void copy_classifier(ModelBundle& dst, const ModelBundle& src) {
  const auto& a = dst.classifier_params.list();
  const auto& b = src.classifier_params.list();
  if (a.size() != b.size()) throw CheckpointError("classifier layouts differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->name != b[i]->name || a[i]->value.shape() != b[i]->value.shape())
      throw CheckpointError("classifier parameter mismatch: " + a[i]->name);
    a[i]->value = b[i]->value;
  }
  if (src.classifier_frozen) dst.freeze_classifier();
}

void save_checkpoint(const ModelBundle& b, const std::filesystem::path& path) {
  json arrays = json::array();
  std::uint64_t offset = 0;
  for (const auto* ps : b.parameter_sets())
    for (const auto& p : ps->list()) {
      arrays.push_back(json{{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}, {"count", p->value.numel()}});
      offset += p->value.numel() * sizeof(float);
    }
  const json header{{"format_version", kCheckpointVersion},
                    {"config", b.cfg},
                    {"classifier_frozen", b.classifier_frozen},
                    {"byte_order", "little"},
                    {"arrays", arrays}};
  const std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path.string());
  f.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint64_t len = hs.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof len);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto* ps : b.parameter_sets())
    for (const auto& p : ps->list())
      f.write(reinterpret_cast<const char*>(p->value.data().data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  if (!f) throw IoError("failed writing checkpoint: " + path.string());
}

std::unique_ptr<ModelBundle> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  if (!f.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint (bad magic): " + path.string());
  if (!f.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 26))
    throw CheckpointError("corrupt checkpoint header length");
  std::string hs(len, '\0');
  if (!f.read(hs.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  std::unique_ptr<ModelBundle> b;
  std::vector<char> data;
  try {
    if (header.at("format_version").get<int>() != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + header.at("format_version").dump());
    b = build_models(header.at("config").get<NetConfig>(), 0);
    data.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    std::map<std::string, Var> by_name;
    for (auto* ps : b->parameter_sets())
      for (const auto& p : ps->list()) by_name[p->name] = p;
    std::set<std::string> filled;
    for (const auto& a : header.at("arrays")) {
      const auto name = a.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw CheckpointError("unknown array in checkpoint: " + name);
      const auto shape = a.at("shape").get<std::vector<int>>();
      const auto count = a.at("count").get<std::uint64_t>();
      const auto offset = a.at("offset").get<std::uint64_t>();
      if (shape != it->second->value.shape() || count != it->second->value.numel())
        throw CheckpointError("shape mismatch for " + name);
      if (offset + count * sizeof(float) > data.size()) throw CheckpointError("truncated checkpoint data at " + name);
      std::memcpy(it->second->value.data().data(), data.data() + offset, count * sizeof(float));
      filled.insert(name);
    }
    if (filled.size() != by_name.size()) throw CheckpointError("checkpoint is missing parameters");
    if (header.at("classifier_frozen").get<bool>()) b->freeze_classifier();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad network config in checkpoint: ") + e.what());
  }
  for (const auto* ps : b->parameter_sets())
    for (const auto& p : ps->list())
      if (!p->value.all_finite()) throw CheckpointError("non-finite values in " + p->name);
  return b;
}

}  // namespace irisforge
