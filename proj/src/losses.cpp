#include "irisforge/losses.hpp"

#include <algorithm>
#include <cmath>

#include "irisforge/error.hpp"
#include "irisforge/nn/ops.hpp"

namespace irisforge {
namespace {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("vector dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// log(1 + exp(x)) without overflow.
double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

std::pair<double, double> adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) throw ShapeError("adversarial losses need non-empty batches");
  const double f = mean(d_fake);
  return {-f, f - mean(d_real)};
}

double style_recon_loss(std::span<const double> generated, std::span<const double> reference) {
  return squared_distance(generated, reference);
}

IdentityPush identity_push_losses(std::span<const double> code_gen, std::span<const double> code_src,
                                  std::span<const double> feat_gen, std::span<const double> feat_src,
                                  double clamp) {
  return {std::min(squared_distance(code_gen, code_src), clamp), std::min(squared_distance(feat_gen, feat_src), clamp)};
}

double warp_regression_loss(int m_true, double eps_true, std::span<const double> m_logits, double eps_pred,
                            double lambda_eps) {
  if (m_true < 0 || m_true >= static_cast<int>(m_logits.size())) throw IndexError("warp index out of range");
  const double mx = *std::max_element(m_logits.begin(), m_logits.end());
  double z = 0.0;
  for (double l : m_logits) z += std::exp(l - mx);
  const double ce = mx + std::log(z) - m_logits[m_true];
  return ce + lambda_eps * std::abs(eps_pred - eps_true);
}

double attribute_loss(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size() || logits.empty()) throw ShapeError("attribute logits/targets mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    s += targets[i] * log1pexp(-logits[i]) + (1.0 - targets[i]) * log1pexp(logits[i]);
  return s / static_cast<double>(logits.size());
}

namespace losses {

using nn::Tensor;

namespace {

int rows_of(const Var& v) { return v->value.rank() == 0 ? 1 : v->value.dim(0); }

}  // namespace

Var generator_adversarial(const Var& d_fake) {
  const std::size_t n = d_fake->value.numel();
  if (n == 0) throw ShapeError("empty critic batch");
  double s = 0.0;
  for (float v : d_fake->value.values()) s += v;
  return nn::external_loss({d_fake}, -s / n, {Tensor(d_fake->value.shape(), -1.0f / n)});
}

Var critic_adversarial(const Var& d_real, const Var& d_fake) {
  const std::size_t nr = d_real->value.numel(), nf = d_fake->value.numel();
  if (nr == 0 || nf == 0) throw ShapeError("empty critic batch");
  double sr = 0.0, sf = 0.0;
  for (float v : d_real->value.values()) sr += v;
  for (float v : d_fake->value.values()) sf += v;
  return nn::external_loss({d_real, d_fake}, sf / nf - sr / nr,
                           {Tensor(d_real->value.shape(), -1.0f / nr), Tensor(d_fake->value.shape(), 1.0f / nf)});
}

Var style_recon(const Var& generated, const Var& reference) {
  if (generated->value.shape() != reference->value.shape()) throw ShapeError("style codes differ in shape");
  const int n = rows_of(generated);
  Tensor ga(generated->value.shape()), gb(reference->value.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < generated->value.numel(); ++i) {
    const double d = static_cast<double>(generated->value[i]) - reference->value[i];
    s += d * d;
    ga[i] = static_cast<float>(2.0 * d / n);
    gb[i] = -ga[i];
  }
  return nn::external_loss({generated, reference}, s / n, {ga, gb});
}

Var clamped_distance(const Var& a, const Var& b, double clamp) {
  if (a->value.shape() != b->value.shape()) throw ShapeError("codes differ in shape");
  const int n = rows_of(a);
  const std::size_t f = a->value.numel() / n;
  Tensor ga(a->value.shape()), gb(b->value.shape());
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
      const double d = static_cast<double>(a->value[r * f + i]) - b->value[r * f + i];
      s += d * d;
    }
    total += std::min(s, clamp);
    if (s >= clamp) continue;
    for (std::size_t i = 0; i < f; ++i) {
      const double d = static_cast<double>(a->value[r * f + i]) - b->value[r * f + i];
      ga[r * f + i] = static_cast<float>(2.0 * d / n);
      gb[r * f + i] = -ga[r * f + i];
    }
  }
  return nn::external_loss({a, b}, total / n, {ga, gb});
}

Var warp_regression(const Var& m_logits, const Var& eps_pred, const std::vector<int>& m_true,
                    const std::vector<double>& eps_true, double lambda_eps) {
  const int n = m_logits->value.dim(0);
  const int m = m_logits->value.dim(1);
  if (static_cast<int>(m_true.size()) != n || static_cast<int>(eps_true.size()) != n ||
      static_cast<int>(eps_pred->value.numel()) != n)
    throw ShapeError("warp regression batch mismatch");
  Tensor gl(m_logits->value.shape()), ge(eps_pred->value.shape());
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    std::vector<double> row(m);
    for (int k = 0; k < m; ++k) row[k] = m_logits->value[r * m + k];
    total += warp_regression_loss(m_true[r], eps_true[r], row, eps_pred->value[r], lambda_eps);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double l : row) z += std::exp(l - mx);
    for (int k = 0; k < m; ++k)
      gl[r * m + k] = static_cast<float>((std::exp(row[k] - mx) / z - (k == m_true[r] ? 1.0 : 0.0)) / n);
    const double d = eps_pred->value[r] - eps_true[r];
    ge[r] = static_cast<float>(lambda_eps * (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n);
  }
  return nn::external_loss({m_logits, eps_pred}, total / n, {gl, ge});
}

Var attribute(const Var& logits, const Tensor& targets) {
  if (logits->value.numel() != targets.numel()) throw ShapeError("attribute logits/targets mismatch");
  const std::size_t n = targets.numel();
  std::vector<double> l(n), t(n);
  Tensor g(logits->value.shape());
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = logits->value[i];
    t[i] = targets[i];
    g[i] = static_cast<float>((sigmoid(l[i]) - t[i]) / n);
  }
  return nn::external_loss({logits}, attribute_loss(l, t), {g});
}

PenaltyResult gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake,
                               const std::vector<float>& alphas, const std::vector<Var>& critic_params,
                               float fd_step) {
  if (real.shape() != fake.shape()) throw ShapeError("gradient penalty: batch shapes differ");
  const int n = real.dim(0);
  if (static_cast<int>(alphas.size()) != n) throw ShapeError("gradient penalty: one alpha per sample");
  const std::size_t per = real.numel() / n;

  Tensor mix(real.shape());
  for (int b = 0; b < n; ++b)
    for (std::size_t i = 0; i < per; ++i)
      mix[b * per + i] = alphas[b] * real[b * per + i] + (1.0f - alphas[b]) * fake[b * per + i];

  // Input gradient with the critic's parameters taken off the tape.
  std::vector<bool> saved;
  for (const auto& p : critic_params) saved.push_back(p->requires_grad), p->requires_grad = false;
  auto x = nn::parameter(mix, "x_hat");
  auto out = critic(x);
  Tensor seed(out->value.shape(), 1.0f);
  nn::backward(out, seed);
  for (std::size_t k = 0; k < critic_params.size(); ++k) critic_params[k]->requires_grad = saved[k];

  PenaltyResult r;
  r.norms.resize(n);
  std::vector<float> weights(n);
  Tensor dir(real.shape());
  for (int b = 0; b < n; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += static_cast<double>(x->grad[b * per + i]) * x->grad[b * per + i];
    const double norm = std::sqrt(s);
    r.norms[b] = norm;
    r.value += (norm - 1.0) * (norm - 1.0) / n;
    weights[b] = static_cast<float>(2.0 * (norm - 1.0) / n);
    if (norm > 0.0)
      for (std::size_t i = 0; i < per; ++i) dir[b * per + i] = static_cast<float>(x->grad[b * per + i] / norm);
  }

  // d||g||/dtheta = d/dtheta of the directional derivative along g/||g||,
  // taken as a central difference of the critic along that direction.
  Tensor plus(real.shape()), minus(real.shape());
  for (std::size_t i = 0; i < mix.numel(); ++i) {
    plus[i] = mix[i] + fd_step * dir[i];
    minus[i] = mix[i] - fd_step * dir[i];
  }
  auto dp = critic(nn::constant(plus));
  auto dm = critic(nn::constant(minus));
  Tensor gp(dp->value.shape()), gm(dm->value.shape());
  double sv = 0.0;
  for (int b = 0; b < n; ++b) {
    gp[b] = weights[b] / (2.0f * fd_step);
    gm[b] = -gp[b];
    sv += gp[b] * dp->value[b] + gm[b] * dm->value[b];
  }
  r.surrogate = nn::external_loss({dp, dm}, sv, {gp, gm});
  return r;
}

}  // namespace losses
}  // namespace irisforge
