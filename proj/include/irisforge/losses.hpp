#pragma once

#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "irisforge/nn/tensor.hpp"

namespace irisforge {

// Closed-form loss values on plain arrays. Each has a tape counterpart below
// that carries the same value plus its analytic gradient.

// (L_G, L_D) = (-mean(d_fake), mean(d_fake) - mean(d_real)).
std::pair<double, double> adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake);

// Squared L2 distance.
double style_recon_loss(std::span<const double> generated, std::span<const double> reference);

inline constexpr double kPushClamp = 10.0;

struct IdentityPush {
  double recon = 0.0;  // ||code_gen - code_src||^2, clamped
  double cls = 0.0;    // ||feat_gen - feat_src||^2, clamped
};
IdentityPush identity_push_losses(std::span<const double> code_gen, std::span<const double> code_src,
                                  std::span<const double> feat_gen, std::span<const double> feat_src,
                                  double clamp = kPushClamp);

// Cross-entropy of m_true under softmax(m_logits) + lambda_eps * |eps_pred - eps_true|.
double warp_regression_loss(int m_true, double eps_true, std::span<const double> m_logits, double eps_pred,
                            double lambda_eps = 1.0);

// Mean binary cross-entropy of the logits against the 0/1 targets.
double attribute_loss(std::span<const double> logits, std::span<const double> targets);

namespace losses {

using nn::Var;

// d: [N] or [N, 1] critic outputs.
Var generator_adversarial(const Var& d_fake);
Var critic_adversarial(const Var& d_real, const Var& d_fake);
// Mean over rows of the squared L2 distance between [N, F] inputs.
Var style_recon(const Var& generated, const Var& reference);
// Mean over rows of min(||a - b||^2, clamp); clamped rows carry no gradient.
Var clamped_distance(const Var& a, const Var& b, double clamp = kPushClamp);
// logits [N, M], eps_pred [N, 1]; mean over rows.
Var warp_regression(const Var& m_logits, const Var& eps_pred, const std::vector<int>& m_true,
                    const std::vector<double>& eps_true, double lambda_eps);
// logits [N, 12], targets [N, 12]; mean over all entries.
Var attribute(const Var& logits, const nn::Tensor& targets);

using Critic = std::function<Var(const Var&)>;

struct PenaltyResult {
  double value = 0.0;            // mean (||grad D(x_hat)|| - 1)^2
  std::vector<double> norms;     // per-sample gradient norms
  Var surrogate;                 // scalar whose parameter gradient equals d(value)/d(params)
};

// Interpolates x_hat = a x_real + (1 - a) x_fake with the given per-sample a.
// The critic's parameters must require grad for the surrogate to be useful;
// their accumulated gradients are left untouched by the input-gradient pass.
PenaltyResult gradient_penalty(const Critic& critic, const nn::Tensor& real, const nn::Tensor& fake,
                               const std::vector<float>& alphas, const std::vector<Var>& critic_params,
                               float fd_step = 1e-2f);

}  // namespace losses
}  // namespace irisforge
