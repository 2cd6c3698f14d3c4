#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "irisforge/error.hpp"
#include "irisforge/losses.hpp"
#include "irisforge/nn/module.hpp"

using namespace irisforge;
using nn::Tensor;
using nn::Var;

namespace {

constexpr double kTol = 1e-6;

Tensor make(std::vector<int> shape, std::vector<float> v) { return Tensor(std::move(shape), std::move(v)); }

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, float s = 1.0f) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> d(0.0f, s);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

std::vector<double> as_double(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Brute-force oracles written out term by term.
double brute_ce(const std::vector<double>& logits, int m) {
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  return -std::log(std::exp(logits[m]) / z);
}

double brute_bce(double logit, double t) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
}

}  // namespace

TEST_CASE("adversarial losses follow the critic means") {
  const std::vector<double> real{1.0, 2.0, 3.0};
  const std::vector<double> fake{0.5, -0.5};
  const auto [lg, ld] = adversarial_losses(real, fake);
  CHECK(lg == doctest::Approx(-0.0).epsilon(kTol));
  CHECK(ld == doctest::Approx(0.0 - 2.0).epsilon(kTol));

  const auto [lg2, ld2] = adversarial_losses(std::vector<double>{-1.0}, std::vector<double>{4.0});
  CHECK(lg2 == doctest::Approx(-4.0));
  CHECK(ld2 == doctest::Approx(5.0));

  const Var dr = nn::parameter(make({3, 1}, {1, 2, 3}), "dr");
  const Var df = nn::parameter(make({2, 1}, {0.5f, -0.5f}), "df");
  const Var g = losses::generator_adversarial(df);
  const Var d = losses::critic_adversarial(dr, df);
  CHECK(std::abs(g->value[0] - lg) < kTol);
  CHECK(std::abs(d->value[0] - ld) < kTol);
  nn::backward(d);
  for (int i = 0; i < 3; ++i) CHECK(dr->grad[i] == doctest::Approx(-1.0 / 3));
  for (int i = 0; i < 2; ++i) CHECK(df->grad[i] == doctest::Approx(0.5));
}

TEST_CASE("style reconstruction is the squared distance") {
  CHECK(style_recon_loss(std::vector<double>{1, 2}, std::vector<double>{0, 0}) == doctest::Approx(5.0));
  CHECK(style_recon_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);

  std::mt19937_64 rng(3);
  const Var a = nn::parameter(random_tensor({4, 6}, rng), "a");
  const Tensor bt = random_tensor({4, 6}, rng);
  const Var l = losses::style_recon(a, nn::constant(bt));
  double brute = 0.0;
  for (int r = 0; r < 4; ++r)
    for (int i = 0; i < 6; ++i) {
      const double d = double(a->value[r * 6 + i]) - bt[r * 6 + i];
      brute += d * d / 4.0;
    }
  CHECK(std::abs(l->value[0] - brute) < kTol * std::max(1.0, brute));
  nn::backward(l);
  for (int k = 0; k < 24; ++k)
    CHECK(a->grad[k] == doctest::Approx(2.0 * (double(a->value[k]) - bt[k]) / 4.0).epsilon(1e-5));
}

TEST_CASE("identity push terms and their clamp") {
  const std::vector<double> zero{0.0, 0.0};
  const std::vector<double> one{1.0, 0.0};
  auto p = identity_push_losses(zero, zero, one, one);
  CHECK(p.recon == 0.0);
  CHECK(p.cls == 0.0);
  p = identity_push_losses(one, zero, one, one);
  CHECK(p.recon == doctest::Approx(1.0));
  CHECK(p.cls == 0.0);
  const std::vector<double> far{10.0, 0.0};
  p = identity_push_losses(far, zero, far, zero);
  CHECK(p.recon == kPushClamp);
  CHECK(p.cls == kPushClamp);

  // Tape form: clamped rows contribute tau and no gradient.
  const Var a = nn::parameter(make({2, 2}, {1, 0, 10, 0}), "a");
  const Var b = nn::constant(make({2, 2}, {0, 0, 0, 0}));
  const Var l = losses::clamped_distance(a, b);
  CHECK(l->value[0] == doctest::Approx((1.0 + kPushClamp) / 2));
  nn::backward(l);
  CHECK(a->grad[0] == doctest::Approx(1.0));
  CHECK(a->grad[2] == 0.0f);
}

TEST_CASE("warp regression: cross-entropy plus shift error") {
  const std::vector<double> uniform(8, 0.3);
  for (int m = 0; m < 8; ++m) CHECK(warp_regression_loss(m, 1.0, uniform, 1.0) == doctest::Approx(std::log(8.0)).epsilon(kTol));
  CHECK(warp_regression_loss(2, 1.0, uniform, 0.5, 2.0) == doctest::Approx(std::log(8.0) + 1.0).epsilon(kTol));

  const std::vector<double> logits{0.1, -2.0, 3.5, 0.0, 1.2};
  for (int m = 0; m < 5; ++m)
    CHECK(warp_regression_loss(m, 0.7, logits, -0.1, 0.5) ==
          doctest::Approx(brute_ce(logits, m) + 0.5 * 0.8).epsilon(kTol));
  // Large logits stay finite.
  const std::vector<double> big{800.0, -800.0};
  CHECK(warp_regression_loss(1, 0.0, big, 0.0) == doctest::Approx(1600.0));
  CHECK_THROWS_AS(warp_regression_loss(5, 0.0, logits, 0.0), IndexError);

  std::mt19937_64 rng(5);
  const Var lg = nn::parameter(random_tensor({3, 8}, rng), "logits");
  const Var ep = nn::parameter(random_tensor({3, 1}, rng), "eps");
  const std::vector<int> ms{0, 7, 3};
  const std::vector<double> et{0.5, -1.0, 1.5};
  const Var l = losses::warp_regression(lg, ep, ms, et, 1.0);
  double brute = 0.0;
  for (int r = 0; r < 3; ++r) {
    std::vector<double> row(lg->value.values().begin() + r * 8, lg->value.values().begin() + r * 8 + 8);
    brute += (brute_ce(row, ms[r]) + std::abs(ep->value[r] - et[r])) / 3.0;
  }
  CHECK(std::abs(l->value[0] - brute) < kTol * std::max(1.0, brute));
  nn::backward(l);
  for (int r = 0; r < 3; ++r) {
    double z = 0.0;
    for (int k = 0; k < 8; ++k) z += std::exp(double(lg->value[r * 8 + k]));
    for (int k = 0; k < 8; ++k) {
      const double soft = std::exp(double(lg->value[r * 8 + k])) / z;
      CHECK(lg->grad[r * 8 + k] == doctest::Approx((soft - (k == ms[r])) / 3.0).epsilon(1e-5));
    }
    CHECK(ep->grad[r] == doctest::Approx((ep->value[r] > et[r] ? 1.0 : -1.0) / 3.0));
  }
}

TEST_CASE("attribute loss is mean binary cross-entropy") {
  const std::vector<double> zeros(12, 0.0);
  std::vector<double> targets(12, 0.0);
  targets[1] = targets[5] = targets[11] = 1.0;
  CHECK(attribute_loss(zeros, targets) == doctest::Approx(std::log(2.0)).epsilon(kTol));

  std::vector<double> wrong(12);
  for (int i = 0; i < 12; ++i) wrong[i] = targets[i] > 0.5 ? -10.0 : 10.0;
  CHECK(attribute_loss(wrong, targets) > 5.0);

  const std::vector<double> logits{0.3, -1.7, 2.2, 0.0, -0.4, 5.0, -3.0, 0.9, 1.1, -0.2, 0.05, 4.0};
  double brute = 0.0;
  for (int i = 0; i < 12; ++i) brute += brute_bce(logits[i], targets[i]) / 12.0;
  CHECK(attribute_loss(logits, targets) == doctest::Approx(brute).epsilon(kTol));

  std::vector<float> lf(logits.begin(), logits.end()), tf(targets.begin(), targets.end());
  const Var l = nn::parameter(make({1, 12}, lf), "l");
  const Var out = losses::attribute(l, make({1, 12}, tf));
  CHECK(std::abs(out->value[0] - brute) < kTol);
  nn::backward(out);
  for (int i = 0; i < 12; ++i)
    CHECK(l->grad[i] == doctest::Approx((1.0 / (1.0 + std::exp(-logits[i])) - targets[i]) / 12.0).epsilon(1e-5));
}

namespace {

// D(x) = <w, flatten(x)> + b, built from tape ops.
struct LinearCritic {
  Var w, b;
  int per;
  Var operator()(const Var& x) const {
    return nn::linear(nn::reshape(x, {x->value.dim(0), per}), w, b);
  }
};

}  // namespace

TEST_CASE("gradient penalty for a linear critic") {
  const int per = 4;
  LinearCritic c{nn::parameter(make({per, 1}, {3, 0, 4, 0}), "w"), nn::parameter(make({1}, {0.2f}), "b"), per};
  std::mt19937_64 rng(9);
  const Tensor real = random_tensor({3, 1, 2, 2}, rng);
  const Tensor fake = random_tensor({3, 1, 2, 2}, rng);
  auto pen = losses::gradient_penalty(c, real, fake, {0.1f, 0.5f, 0.9f}, {c.w, c.b});
  for (double n : pen.norms) CHECK(n == doctest::Approx(5.0).epsilon(kTol));
  CHECK(std::abs(pen.value - 16.0) < kTol * 16.0);
  // The input pass must not leak into parameter gradients.
  CHECK(c.w->grad.empty());

  // d/dw (||w|| - 1)^2 = 2 (||w|| - 1) w / ||w||.
  nn::backward(pen.surrogate);
  const float expect[per] = {3, 0, 4, 0};
  for (int i = 0; i < per; ++i) CHECK(c.w->grad[i] == doctest::Approx(2.0 * 4.0 * expect[i] / 5.0).epsilon(1e-4));
  CHECK(c.b->grad[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("gradient penalty of a constant critic is one") {
  const int per = 4;
  LinearCritic c{nn::parameter(Tensor({per, 1}), "w"), nn::parameter(make({1}, {1.0f}), "b"), per};
  std::mt19937_64 rng(10);
  const Tensor real = random_tensor({2, 1, 2, 2}, rng);
  const Tensor fake = random_tensor({2, 1, 2, 2}, rng);
  auto pen = losses::gradient_penalty(c, real, fake, {0.3f, 0.6f}, {c.w, c.b});
  CHECK(pen.value == doctest::Approx(1.0));
  for (double n : pen.norms) CHECK(n == 0.0);
  CHECK_THROWS_AS(losses::gradient_penalty(c, real, random_tensor({3, 1, 2, 2}, rng), {0.3f, 0.6f}, {c.w, c.b}),
                  ShapeError);
  CHECK_THROWS_AS(losses::gradient_penalty(c, real, fake, {0.3f}, {c.w, c.b}), ShapeError);
}

TEST_CASE("gradient penalty surrogate matches finite differences on a small network") {
  std::mt19937_64 rng(21);
  nn::ParameterSet ps;
  nn::Conv2d conv(ps, "conv", 1, 3, 3, 1, 1, rng);
  nn::Linear fc(ps, "fc", 3 * 4 * 4, 1, rng);
  auto critic = [&](const Var& x) {
    return fc(nn::reshape(nn::tanh(conv(x)), {x->value.dim(0), 3 * 4 * 4}));
  };
  const Tensor real = random_tensor({2, 1, 4, 4}, rng);
  const Tensor fake = random_tensor({2, 1, 4, 4}, rng);
  const std::vector<float> alphas{0.25f, 0.75f};

  // Input-gradient norms against central differences of the critic.
  auto pen = losses::gradient_penalty(critic, real, fake, alphas, ps.list(), 1e-3f);
  for (int b = 0; b < 2; ++b) {
    double s = 0.0;
    for (int i = 0; i < 16; ++i) {
      Tensor xp(real.shape()), xm(real.shape());
      for (std::size_t k = 0; k < real.numel(); ++k)
        xp[k] = xm[k] = alphas[k / 16] * real[k] + (1 - alphas[k / 16]) * fake[k];
      xp[b * 16 + i] += 1e-2f;
      xm[b * 16 + i] -= 1e-2f;
      const double g = (critic(nn::constant(xp))->value[b] - critic(nn::constant(xm))->value[b]) / 2e-2;
      s += g * g;
    }
    CHECK(pen.norms[b] == doctest::Approx(std::sqrt(s)).epsilon(1e-2));
  }

  ps.zero_grad();
  nn::backward(pen.surrogate);
  // Parameter gradient against central differences of the penalty value.
  int checked = 0;
  for (const auto& p : ps.list()) {
    for (std::size_t k = 0; k < p->value.numel(); k += 7) {
      const float v0 = p->value[k];
      p->value[k] = v0 + 1e-2f;
      const double up = losses::gradient_penalty(critic, real, fake, alphas, ps.list()).value;
      p->value[k] = v0 - 1e-2f;
      const double dn = losses::gradient_penalty(critic, real, fake, alphas, ps.list()).value;
      p->value[k] = v0;
      const double fd = (up - dn) / 2e-2;
      CHECK(p->grad[k] == doctest::Approx(fd).epsilon(5e-2).scale(1e-2));
      ++checked;
    }
  }
  CHECK(checked > 5);
}
