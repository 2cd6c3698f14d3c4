#include "irisforge/nn/module.hpp"

#include <cmath>

#include "irisforge/error.hpp"
#include "irisforge/util.hpp"

namespace irisforge::nn {
namespace {

Tensor random_normal(std::vector<int> shape, float stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> dist(0.0f, stddev);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Var ParameterSet::add(const std::string& name, Tensor init) {
  for (const auto& p : params_)
    if (p->name == name) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back(parameter(std::move(init), name));
  return params_.back();
}

void ParameterSet::set_trainable(bool trainable) {
  for (auto& p : params_) p->requires_grad = trainable;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad = Tensor();
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

std::uint64_t ParameterSet::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) h = fnv1a64(std::as_bytes(p->value.data()), h);
  return h;
}

Conv2d::Conv2d(ParameterSet& ps, const std::string& name, int in, int out, int kernel, int stride_, int pad_,
               std::mt19937_64& rng, float gain)
    : stride(stride_), pad(pad_) {
  const float std = gain / std::sqrt(static_cast<float>(in * kernel * kernel));
  weight = ps.add(name + ".weight", random_normal({out, in, kernel, kernel}, std, rng));
  bias = ps.add(name + ".bias", Tensor({out}, 0.0f));
}

ConvTranspose2d::ConvTranspose2d(ParameterSet& ps, const std::string& name, int in, int out, int kernel,
                                 int stride_, int pad_, std::mt19937_64& rng, float gain)
    : stride(stride_), pad(pad_) {
  // Each output pixel sees roughly in * (kernel/stride)^2 inputs.
  const float fan = static_cast<float>(in * kernel * kernel) / static_cast<float>(stride * stride);
  weight = ps.add(name + ".weight", random_normal({in, out, kernel, kernel}, gain / std::sqrt(fan), rng));
  bias = ps.add(name + ".bias", Tensor({out}, 0.0f));
}

Linear::Linear(ParameterSet& ps, const std::string& name, int in, int out, std::mt19937_64& rng, float gain) {
  weight = ps.add(name + ".weight", random_normal({in, out}, gain / std::sqrt(static_cast<float>(in)), rng));
  bias = ps.add(name + ".bias", Tensor({out}, 0.0f));
}

InstanceNorm::InstanceNorm(ParameterSet& ps, const std::string& name, int channels) {
  gamma = ps.add(name + ".gamma", Tensor({channels}, 1.0f));
  beta = ps.add(name + ".beta", Tensor({channels}, 0.0f));
}

Adam::Adam(const ParameterSet& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  for (const auto& p : params.list()) {
    m_.emplace_back(p->value.numel(), 0.0f);
    v_.emplace_back(p->value.numel(), 0.0f);
    t_.push_back(0);
  }
}

void Adam::step() {
  const auto& list = params_->list();
  for (std::size_t k = 0; k < list.size(); ++k) {
    Node& p = *list[k];
    if (p.grad.numel() != p.value.numel()) continue;
    const long t = ++t_[k];
    const float c1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t));
    const float c2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t));
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const float g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * g * g;
      p.value[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

}  // namespace irisforge::nn
