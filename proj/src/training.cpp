#include "irisforge/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "irisforge/error.hpp"
#include "irisforge/json_io.hpp"
#include "irisforge/losses.hpp"
#include "irisforge/nn/ops.hpp"
#include "irisforge/util.hpp"

namespace irisforge {

using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
  if (batch < 1 || steps < 0) throw ConfigError("batch must be positive and steps non-negative");
  for (float lr : {lr_style, lr_identity, lr_warp, lr_generator, lr_critic})
    if (!(lr > 0.0f)) throw ConfigError("learning rates must be positive");
  for (double w : {lambda_sty, lambda_id_recon, lambda_id_cls, lambda_attr, lambda_gp, lambda_eps, lambda_wreg})
    if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
  if (!(eps_min > 0.0 && eps_max >= eps_min)) throw ConfigError("eps range must satisfy 0 < eps_min <= eps_max");
  if (style_steps < 0 || identity_steps < 0 || style_steps + identity_steps == 0)
    throw ConfigError("interleave ratio needs at least one pathway step");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch", c.batch},
           {"steps", c.steps},
           {"lr_style", c.lr_style},
           {"lr_identity", c.lr_identity},
           {"lr_warp", c.lr_warp},
           {"lr_generator", c.lr_generator},
           {"lr_critic", c.lr_critic},
           {"lambda_sty", c.lambda_sty},
           {"lambda_id_recon", c.lambda_id_recon},
           {"lambda_id_cls", c.lambda_id_cls},
           {"lambda_attr", c.lambda_attr},
           {"lambda_gp", c.lambda_gp},
           {"lambda_eps", c.lambda_eps},
           {"lambda_wreg", c.lambda_wreg},
           {"eps_min", c.eps_min},
           {"eps_max", c.eps_max},
           {"bypass_warp", c.bypass_warp},
           {"style_steps", c.style_steps},
           {"identity_steps", c.identity_steps},
           {"checkpoint_every", c.checkpoint_every},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  json defaults;
  to_json(defaults, c);
  for (const auto& [k, v] : j.items())
    if (!defaults.contains(k)) throw ConfigError("unknown training config key: " + k);
  c.batch = j.value("batch", c.batch);
  c.steps = j.value("steps", c.steps);
  c.lr_style = j.value("lr_style", c.lr_style);
  c.lr_identity = j.value("lr_identity", c.lr_identity);
  c.lr_warp = j.value("lr_warp", c.lr_warp);
  c.lr_generator = j.value("lr_generator", c.lr_generator);
  c.lr_critic = j.value("lr_critic", c.lr_critic);
  c.lambda_sty = j.value("lambda_sty", c.lambda_sty);
  c.lambda_id_recon = j.value("lambda_id_recon", c.lambda_id_recon);
  c.lambda_id_cls = j.value("lambda_id_cls", c.lambda_id_cls);
  c.lambda_attr = j.value("lambda_attr", c.lambda_attr);
  c.lambda_gp = j.value("lambda_gp", c.lambda_gp);
  c.lambda_eps = j.value("lambda_eps", c.lambda_eps);
  c.lambda_wreg = j.value("lambda_wreg", c.lambda_wreg);
  c.eps_min = j.value("eps_min", c.eps_min);
  c.eps_max = j.value("eps_max", c.eps_max);
  c.bypass_warp = j.value("bypass_warp", c.bypass_warp);
  c.style_steps = j.value("style_steps", c.style_steps);
  c.identity_steps = j.value("identity_steps", c.identity_steps);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.seed = j.value("seed", c.seed);
}

const char* pathway_name(Pathway p) { return p == Pathway::Style ? "style" : "identity"; }

bool LossRecord::all_finite() const {
  for (double v : {g_sty, d_sty, sty_recon, g_id, d_id, w_reg, id_recon, id_cls, attr_real, attr_fake, gp})
    if (!std::isfinite(v)) return false;
  return true;
}

std::string loss_csv_header() {
  return "step,pathway,g_sty,d_sty,sty_recon,g_id,d_id,w_reg,id_recon,id_cls,attr_real,attr_fake,gp,skipped";
}

std::string loss_csv_row(const LossRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%ld,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d", r.step,
                pathway_name(r.pathway), r.g_sty, r.d_sty, r.sty_recon, r.g_id, r.d_id, r.w_reg, r.id_recon, r.id_cls,
                r.attr_real, r.attr_fake, r.gp, r.skipped);
  return buf;
}

Optimizers::Optimizers(const ModelBundle& b, const TrainConfig& cfg) {
  auto make = [](const nn::ParameterSet& ps, float lr) {
    return std::make_unique<nn::Adam>(ps, nn::AdamConfig{lr, 0.5f, 0.999f, 1e-8f});
  };
  style = make(b.style_params, cfg.lr_style);
  identity = make(b.identity_params, cfg.lr_identity);
  warp = make(b.warp_params, cfg.lr_warp);
  generator = make(b.generator_params, cfg.lr_generator);
  critic = make(b.critic_params, cfg.lr_critic);
}

TrainingSet TrainingSet::from_manifest(const Manifest& m) {
  if (m.samples.empty()) throw InsufficientData("training manifest is empty");
  const auto images = load_images(m);
  TrainingSet t;
  t.size = images[0].width;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != t.size || images[i].height != t.size)
      throw ShapeError("training images must share one square size");
    t.images.push_back(to_signed(images[i]));
    t.attributes.push_back(m.samples[i].attribute);
    t.identities.push_back(m.samples[i].identity_id);
  }
  return t;
}

Batch TrainingSet::sample(int batch, std::mt19937_64& rng) const {
  const int hw = size * size;
  Batch b{Tensor({batch, 1, size, size}), Tensor({batch, 1, size, size}), Tensor({batch, kAttributeBits})};
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  for (int k = 0; k < batch; ++k) {
    const std::size_t i = pick(rng), j = pick(rng);
    std::copy(images[i].begin(), images[i].end(), b.x_i.values().begin() + static_cast<std::size_t>(k) * hw);
    std::copy(images[j].begin(), images[j].end(), b.x_j.values().begin() + static_cast<std::size_t>(k) * hw);
    for (int q = 0; q < kAttributeBits; ++q) b.y_j[k * kAttributeBits + q] = attributes[j].bits()[q] ? 1.0f : 0.0f;
  }
  return b;
}

namespace {

void check_finite(const Var& v, const char* what, long step) {
  if (!std::isfinite(v->value[0]))
    throw NonFiniteLoss(std::string(what) + " is not finite at step " + std::to_string(step));
}

std::vector<float> draw_alphas(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> a(n);
  for (auto& x : a) x = u(rng);
  return a;
}

struct CriticTerms {
  double adv = 0, attr = 0, gp = 0;
};

// Critic update on detached fakes; real images carry the attribute labels.
CriticTerms critic_update(ModelBundle& b, const Tensor& real, const Tensor& real_y, const Tensor& fake,
                          const TrainConfig& cfg, Optimizers& opt, std::mt19937_64& rng, long step) {
  b.critic_params.set_trainable(true);
  b.critic_params.zero_grad();
  const auto d_real = b.critic(nn::constant(real));
  const auto d_fake = b.critic(nn::constant(fake));
  const Var adv = losses::critic_adversarial(d_real.realness, d_fake.realness);
  const Var attr = losses::attribute(d_real.attributes, real_y);
  auto pen = losses::gradient_penalty([&](const Var& x) { return b.critic(x).realness; }, real, fake,
                                      draw_alphas(real.dim(0), rng), b.critic_params.list());
  const Var total = nn::weighted_sum(
      {{1.0f, adv}, {static_cast<float>(cfg.lambda_attr), attr}, {static_cast<float>(cfg.lambda_gp), pen.surrogate}});
  check_finite(adv, "critic adversarial loss", step);
  check_finite(attr, "critic attribute loss", step);
  if (!std::isfinite(pen.value)) throw NonFiniteLoss("gradient penalty is not finite at step " + std::to_string(step));
  nn::backward(total);
  opt.critic->step();
  return {adv->value[0], attr->value[0], pen.value};
}

}  // namespace

LossRecord style_pathway_step(ModelBundle& b, const Batch& batch, const TrainConfig& cfg, Optimizers& opt,
                              std::mt19937_64& rng) {
  if (!b.classifier_frozen) throw ConfigError("style pathway requires a frozen classifier");
  b.identity_params.set_trainable(false);
  b.warp_params.set_trainable(false);
  b.classifier_params.set_trainable(false);
  b.style_params.set_trainable(true);
  b.generator_params.set_trainable(true);

  LossRecord rec;
  rec.pathway = Pathway::Style;
  b.style_params.zero_grad();
  b.generator_params.zero_grad();

  const Var d = b.identity_encoder(nn::constant(batch.x_i));  // warp bypassed
  const Var y = nn::constant(batch.y_j);
  const Var s = b.style_encoder(nn::constant(batch.x_j), y);
  const Var x_bar = b.generator(d, s);

  const auto ct = critic_update(b, batch.x_j, batch.y_j, x_bar->value, cfg, opt, rng, rec.step);
  rec.d_sty = ct.adv;
  rec.attr_real = ct.attr;
  rec.gp = ct.gp;

  b.critic_params.set_trainable(false);
  const auto d_fake = b.critic(x_bar);
  const Var g_adv = losses::generator_adversarial(d_fake.realness);
  const Var g_attr = losses::attribute(d_fake.attributes, batch.y_j);
  const Var recon = losses::style_recon(b.style_encoder(x_bar, y), nn::detach(s));
  const Var total = nn::weighted_sum({{1.0f, g_adv},
                                      {static_cast<float>(cfg.lambda_attr), g_attr},
                                      {static_cast<float>(cfg.lambda_sty), recon}});
  check_finite(total, "style pathway generator loss", rec.step);
  nn::backward(total);
  opt.style->step();
  opt.generator->step();
  b.critic_params.set_trainable(true);

  rec.g_sty = g_adv->value[0];
  rec.attr_fake = g_attr->value[0];
  rec.sty_recon = recon->value[0];
  return rec;
}

LossRecord identity_pathway_step(ModelBundle& b, const Batch& batch, const TrainConfig& cfg, Optimizers& opt,
                                 std::mt19937_64& rng) {
  if (!b.classifier_frozen) throw ConfigError("identity pathway requires a frozen classifier");
  b.style_params.set_trainable(false);
  b.classifier_params.set_trainable(false);
  b.identity_params.set_trainable(true);
  b.warp_params.set_trainable(true);
  b.generator_params.set_trainable(true);

  LossRecord rec;
  rec.pathway = Pathway::Identity;
  b.identity_params.zero_grad();
  b.warp_params.zero_grad();
  b.generator_params.zero_grad();

  const int n = batch.x_i.dim(0);
  const int M = b.cfg.warps;
  const Var x_i = nn::constant(batch.x_i);
  const Var z = b.identity_encoder(x_i);

  std::vector<int> ms(n);
  std::vector<double> eps(n, 0.0);
  std::uniform_int_distribution<int> pick_m(0, M - 1);
  std::uniform_real_distribution<double> mag(cfg.eps_min, cfg.eps_max);
  std::bernoulli_distribution sign(0.5);
  const WarpParams wp = b.warp.params();
  for (int i = 0; i < n; ++i) {
    ms[i] = pick_m(rng);
    if (cfg.bypass_warp) continue;
    const std::vector<double> zi(z->value.values().begin() + i * b.cfg.latent_dim,
                                 z->value.values().begin() + (i + 1) * b.cfg.latent_dim);
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
      if (attempt > 0) ms[i] = pick_m(rng);
      eps[i] = mag(rng) * (sign(rng) ? 1.0 : -1.0);
      try {
        (void)shift_code(wp, ms[i], zi, eps[i]);
        ok = true;
      } catch (const DegenerateGradient&) {
      }
    }
    if (!ok) {
      eps[i] = 0.0;
      ++rec.skipped;
    }
  }

  const Var z_bar = b.warp.shift(z, ms, eps);
  const Var y = nn::constant(batch.y_j);
  const Var s = b.style_encoder(nn::constant(batch.x_j), y);
  const Var x_bar = b.generator(z_bar, s);

  const auto ct = critic_update(b, batch.x_j, batch.y_j, x_bar->value, cfg, opt, rng, rec.step);
  rec.d_id = ct.adv;
  rec.attr_real = ct.attr;
  rec.gp = ct.gp;

  b.critic_params.set_trainable(false);
  const auto d_fake = b.critic(x_bar);
  const Var g_adv = losses::generator_adversarial(d_fake.realness);
  const Var g_attr = losses::attribute(d_fake.attributes, batch.y_j);
  const auto rc = b.warp.reconstruct(z, z_bar);
  const Var wreg = losses::warp_regression(rc.logits, rc.eps, ms, eps, cfg.lambda_eps);
  const Var id_recon = losses::clamped_distance(b.identity_encoder(x_bar), z);
  const Var id_cls = losses::clamped_distance(b.classifier(x_bar), b.classifier(x_i));
  const Var total = nn::weighted_sum({{1.0f, g_adv},
                                      {static_cast<float>(cfg.lambda_attr), g_attr},
                                      {static_cast<float>(cfg.lambda_wreg), wreg},
                                      {static_cast<float>(-cfg.lambda_id_recon), id_recon},
                                      {static_cast<float>(-cfg.lambda_id_cls), id_cls}});
  check_finite(total, "identity pathway generator loss", rec.step);
  nn::backward(total);
  opt.identity->step();
  opt.warp->step();
  opt.generator->step();
  b.critic_params.set_trainable(true);

  rec.g_id = g_adv->value[0];
  rec.attr_fake = g_attr->value[0];
  rec.w_reg = wreg->value[0];
  rec.id_recon = id_recon->value[0];
  rec.id_cls = id_cls->value[0];
  return rec;
}

Pathway pathway_for_step(const TrainConfig& cfg, long step) {
  const long cycle = cfg.style_steps + cfg.identity_steps;
  return step % cycle < cfg.style_steps ? Pathway::Style : Pathway::Identity;
}

TrainResult train(ModelBundle& b, const TrainConfig& cfg, const Manifest& train_set, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (!b.classifier_frozen) throw ConfigError("train needs a pretrained, frozen classifier");
  const TrainingSet data = TrainingSet::from_manifest(train_set);
  if (data.size != b.cfg.image_size) throw ShapeError("training images do not match the network image size");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::ofstream log(out_dir / "losses.csv");
  if (!log) throw IoError("cannot write " + (out_dir / "losses.csv").string());
  log << loss_csv_header() << '\n';

  Optimizers opt(b, cfg);
  TrainResult result;
  for (long step = 0; step < cfg.steps; ++step) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    const Batch batch = data.sample(cfg.batch, rng);
    LossRecord rec = pathway_for_step(cfg, step) == Pathway::Style ? style_pathway_step(b, batch, cfg, opt, rng)
                                                                   : identity_pathway_step(b, batch, cfg, opt, rng);
    rec.step = step;
    if (!rec.all_finite()) throw NonFiniteLoss("non-finite loss recorded at step " + std::to_string(step));
    log << loss_csv_row(rec) << '\n';
    result.log.push_back(rec);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06ld.ifg", step + 1);
      save_checkpoint(b, out_dir / name);
    }
  }
  if (!log) throw IoError("failed writing loss log");
  result.checkpoint = out_dir / "checkpoint.ifg";
  save_checkpoint(b, result.checkpoint);
  return result;
}

}  // namespace irisforge
