#pragma once

#include <utility>
#include <vector>

#include "irisforge/nn/tensor.hpp"

namespace irisforge::nn {

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var linear(const Var& x, const Var& w, const Var& b);
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);

Var leaky_relu(const Var& x, float slope);
Var relu(const Var& x);
Var tanh(const Var& x);

Var reshape(const Var& x, std::vector<int> shape);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, float s);

// [N, A] ++ [N, B] -> [N, A + B]
Var concat_features(const Var& a, const Var& b);
// [N, C, H, W] with [N, F] broadcast as F constant planes -> [N, C + F, H, W]
Var attach_planes(const Var& x, const Var& features);
// Row-wise L2 normalization of [N, F].
Var l2_normalize(const Var& x, float eps = 1e-8f);
// Rows [begin, end) of the leading dimension.
Var slice_batch(const Var& x, int begin, int end);
// Stack along the leading dimension.
Var concat_batch(const Var& a, const Var& b);

// Scalar node carrying a precomputed value and the gradients of that value
// with respect to each input; lets closed-form losses join the tape.
Var external_loss(std::vector<Var> inputs, double value, std::vector<Tensor> grads);

// sum_i weight_i * term_i over scalar nodes.
Var weighted_sum(const std::vector<std::pair<float, Var>>& terms);

}  // namespace irisforge::nn
