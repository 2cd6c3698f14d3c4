#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "irisforge/nn/ops.hpp"

namespace irisforge::nn {

// Owns a flat list of named parameters. Networks register their layers'
// parameters here so checkpoints, optimizers and freeze checks see one list.
class ParameterSet {
 public:
  Var add(const std::string& name, Tensor init);
  const std::vector<Var>& list() const { return params_; }

  void set_trainable(bool trainable);
  void zero_grad();
  std::size_t count() const;
  // FNV-1a over every parameter's raw bytes in registration order.
  std::uint64_t hash() const;

 private:
  std::vector<Var> params_;
};

struct Conv2d {
  Var weight, bias;
  int stride = 1, pad = 0;
  Conv2d() = default;
  Conv2d(ParameterSet& ps, const std::string& name, int in, int out, int kernel, int stride, int pad,
         std::mt19937_64& rng, float gain = 1.4142f);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
};

struct ConvTranspose2d {
  Var weight, bias;
  int stride = 1, pad = 0;
  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterSet& ps, const std::string& name, int in, int out, int kernel, int stride, int pad,
                  std::mt19937_64& rng, float gain = 1.4142f);
  Var operator()(const Var& x) const { return conv_transpose2d(x, weight, bias, stride, pad); }
};

struct Linear {
  Var weight, bias;
  Linear() = default;
  Linear(ParameterSet& ps, const std::string& name, int in, int out, std::mt19937_64& rng, float gain = 1.0f);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
};

struct InstanceNorm {
  Var gamma, beta;
  InstanceNorm() = default;
  InstanceNorm(ParameterSet& ps, const std::string& name, int channels);
  Var operator()(const Var& x) const { return instance_norm(x, gamma, beta); }
};

struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adaptive moment estimation over one parameter set. Parameters without a
// gradient this step are left untouched.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig cfg);
  void step();
  const AdamConfig& config() const { return cfg_; }

 private:
  const ParameterSet* params_;
  AdamConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  std::vector<long> t_;
};

}  // namespace irisforge::nn
