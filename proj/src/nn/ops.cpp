#include "irisforge/nn/ops.hpp"

#include <cmath>

#include "irisforge/error.hpp"
#include "irisforge/nn/kernels.hpp"

namespace irisforge::nn {
namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

std::span<float> grad_or_empty(const Var& v) {
  return v && v->requires_grad ? v->ensure_grad().data() : std::span<float>{};
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x->value.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(x->value.shape()));
}

void accumulate_into(Node& target, std::span<const float> delta) {
  auto g = target.ensure_grad().data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d weight");
  ConvGeometry g{x->value.dim(0), x->value.dim(1), x->value.dim(2), x->value.dim(3),
                 w->value.dim(0), w->value.dim(2), stride, pad};
  if (w->value.dim(1) != g.in_channels) throw ShapeError("conv2d: channel mismatch");
  Tensor y({g.batch, g.out_channels, g.out_h(), g.out_w()});
  kernels::conv2d_forward(g, x->value.data(), w->value.data(), b ? b->value.data() : std::span<const float>{},
                          y.data());
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make_node(std::move(y), parents, [g](Node& self) {
    const Var& xv = self.parents[0];
    const Var& wv = self.parents[1];
    const Var bv = self.parents.size() > 2 ? self.parents[2] : Var{};
    std::vector<float> dx;
    if (xv->requires_grad) dx.resize(xv->value.numel());
    kernels::conv2d_backward(g, xv->value.data(), wv->value.data(), self.grad.data(), dx, grad_or_empty(wv),
                             grad_or_empty(bv));
    if (xv->requires_grad) accumulate_into(*xv, dx);
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  require_rank(x, 4, "conv_transpose2d");
  require_rank(w, 4, "conv_transpose2d weight");
  ConvGeometry g{x->value.dim(0), x->value.dim(1), x->value.dim(2), x->value.dim(3),
                 w->value.dim(1), w->value.dim(2), stride, pad};
  if (w->value.dim(0) != g.in_channels) throw ShapeError("conv_transpose2d: channel mismatch");
  Tensor y({g.batch, g.out_channels, g.tout_h(), g.tout_w()});
  kernels::conv_transpose2d_forward(g, x->value.data(), w->value.data(),
                                    b ? b->value.data() : std::span<const float>{}, y.data());
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make_node(std::move(y), parents, [g](Node& self) {
    const Var& xv = self.parents[0];
    const Var& wv = self.parents[1];
    const Var bv = self.parents.size() > 2 ? self.parents[2] : Var{};
    std::vector<float> dx;
    if (xv->requires_grad) dx.resize(xv->value.numel());
    kernels::conv_transpose2d_backward(g, xv->value.data(), wv->value.data(), self.grad.data(), dx,
                                       grad_or_empty(wv), grad_or_empty(bv));
    if (xv->requires_grad) accumulate_into(*xv, dx);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 2, "linear");
  const int batch = x->value.dim(0), in = x->value.dim(1), out = w->value.dim(1);
  if (w->value.dim(0) != in) throw ShapeError("linear: input width mismatch");
  Tensor y({batch, out});
  kernels::linear_forward(batch, in, out, x->value.data(), w->value.data(),
                          b ? b->value.data() : std::span<const float>{}, y.data());
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make_node(std::move(y), parents, [batch, in, out](Node& self) {
    const Var& xv = self.parents[0];
    const Var& wv = self.parents[1];
    const Var bv = self.parents.size() > 2 ? self.parents[2] : Var{};
    std::vector<float> dx;
    if (xv->requires_grad) dx.resize(xv->value.numel());
    kernels::linear_backward(batch, in, out, xv->value.data(), wv->value.data(), self.grad.data(), dx,
                             grad_or_empty(wv), grad_or_empty(bv));
    if (xv->requires_grad) accumulate_into(*xv, dx);
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  require_rank(x, 4, "instance_norm");
  const int batch = x->value.dim(0), channels = x->value.dim(1);
  const int spatial = x->value.dim(2) * x->value.dim(3);
  Tensor y(x->value.shape());
  auto stats = std::make_shared<std::vector<float>>(2 * static_cast<std::size_t>(batch) * channels);
  kernels::instance_norm_forward(batch, channels, spatial, eps, x->value.data(), gamma->value.data(),
                                 beta->value.data(), y.data(), *stats);
  return make_node(std::move(y), {x, gamma, beta}, [batch, channels, spatial, stats](Node& self) {
    const Var& xv = self.parents[0];
    const Var& gv = self.parents[1];
    const Var& bv = self.parents[2];
    std::vector<float> dx;
    if (xv->requires_grad) dx.resize(xv->value.numel());
    std::span<float> dg = gv->requires_grad ? gv->ensure_grad().data() : std::span<float>{};
    std::span<float> db = bv->requires_grad ? bv->ensure_grad().data() : std::span<float>{};
    std::vector<float> scratch_g, scratch_b;
    if (dg.empty() != db.empty()) {
      // The kernel updates both or neither.
      scratch_g.assign(channels, 0.0f);
      scratch_b.assign(channels, 0.0f);
      kernels::instance_norm_backward(batch, channels, spatial, xv->value.data(), gv->value.data(), *stats,
                                      self.grad.data(), dx, scratch_g, scratch_b);
      if (!dg.empty()) accumulate_into(*gv, scratch_g);
      if (!db.empty()) accumulate_into(*bv, scratch_b);
    } else {
      kernels::instance_norm_backward(batch, channels, spatial, xv->value.data(), gv->value.data(), *stats,
                                      self.grad.data(), dx, dg, db);
    }
    if (xv->requires_grad) accumulate_into(*xv, dx);
  });
}

Var leaky_relu(const Var& x, float slope) {
  Tensor y(x->value.shape());
  const auto xs = x->value.data();
  auto ys = y.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] > 0.0f ? xs[i] : slope * xs[i];
  return make_node(std::move(y), {x}, [slope](Node& self) {
    Node& xn = *self.parents[0];
    auto g = xn.ensure_grad().data();
    const auto xs = xn.value.data();
    const auto d = self.grad.data();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += xs[i] > 0.0f ? d[i] : slope * d[i];
  });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0f); }

Var tanh(const Var& x) {
  Tensor y(x->value.shape());
  const auto xs = x->value.data();
  auto ys = y.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = std::tanh(xs[i]);
  return make_node(std::move(y), {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    auto g = xn.ensure_grad().data();
    const auto ys = self.value.data();
    const auto d = self.grad.data();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i] * (1.0f - ys[i] * ys[i]);
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor y = x->value;
  y.reshape(std::move(shape));
  return make_node(std::move(y), {x}, [](Node& self) { accumulate_into(*self.parents[0], self.grad.data()); });
}

Var add(const Var& a, const Var& b) {
  if (a->value.numel() != b->value.numel()) throw ShapeError("add: size mismatch");
  Tensor y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b->value[i];
  return make_node(std::move(y), {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) accumulate_into(*p, self.grad.data());
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0f)); }

Var scale(const Var& a, float s) {
  Tensor y = a->value;
  for (auto& v : y.values()) v *= s;
  return make_node(std::move(y), {a}, [s](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var concat_features(const Var& a, const Var& b) {
  require_rank(a, 2, "concat_features");
  require_rank(b, 2, "concat_features");
  const int n = a->value.dim(0), fa = a->value.dim(1), fb = b->value.dim(1);
  if (b->value.dim(0) != n) throw ShapeError("concat_features: batch mismatch");
  Tensor y({n, fa + fb});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < fa; ++j) y[i * (fa + fb) + j] = a->value[i * fa + j];
    for (int j = 0; j < fb; ++j) y[i * (fa + fb) + fa + j] = b->value[i * fb + j];
  }
  return make_node(std::move(y), {a, b}, [n, fa, fb](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto g = self.parents[0]->ensure_grad().data();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < fa; ++j) g[i * fa + j] += self.grad[i * (fa + fb) + j];
    }
    if (self.parents[1]->requires_grad) {
      auto g = self.parents[1]->ensure_grad().data();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < fb; ++j) g[i * fb + j] += self.grad[i * (fa + fb) + fa + j];
    }
  });
}

Var attach_planes(const Var& x, const Var& features) {
  require_rank(x, 4, "attach_planes");
  require_rank(features, 2, "attach_planes");
  const int n = x->value.dim(0), c = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
  const int f = features->value.dim(1);
  if (features->value.dim(0) != n) throw ShapeError("attach_planes: batch mismatch");
  Tensor y({n, c + f, x->value.dim(2), x->value.dim(3)});
  for (int i = 0; i < n; ++i) {
    float* out = y.data().data() + static_cast<std::size_t>(i) * (c + f) * hw;
    const float* in = x->value.data().data() + static_cast<std::size_t>(i) * c * hw;
    std::copy(in, in + static_cast<std::size_t>(c) * hw, out);
    for (int j = 0; j < f; ++j)
      std::fill(out + static_cast<std::size_t>(c + j) * hw, out + static_cast<std::size_t>(c + j + 1) * hw,
                features->value[i * f + j]);
  }
  return make_node(std::move(y), {x, features}, [n, c, f, hw](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto g = self.parents[0]->ensure_grad().data();
      for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < static_cast<std::size_t>(c) * hw; ++k)
          g[static_cast<std::size_t>(i) * c * hw + k] += self.grad[static_cast<std::size_t>(i) * (c + f) * hw + k];
    }
    if (self.parents[1]->requires_grad) {
      auto g = self.parents[1]->ensure_grad().data();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) {
          double s = 0.0;
          const std::size_t base = (static_cast<std::size_t>(i) * (c + f) + c + j) * hw;
          for (int k = 0; k < hw; ++k) s += self.grad[base + k];
          g[i * f + j] += static_cast<float>(s);
        }
    }
  });
}

Var l2_normalize(const Var& x, float eps) {
  require_rank(x, 2, "l2_normalize");
  const int n = x->value.dim(0), f = x->value.dim(1);
  Tensor y(x->value.shape());
  auto norms = std::make_shared<std::vector<float>>(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < f; ++j) s += static_cast<double>(x->value[i * f + j]) * x->value[i * f + j];
    const float nr = static_cast<float>(std::sqrt(s) + eps);
    (*norms)[i] = nr;
    for (int j = 0; j < f; ++j) y[i * f + j] = x->value[i * f + j] / nr;
  }
  return make_node(std::move(y), {x}, [n, f, norms](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < f; ++j) dot += static_cast<double>(self.grad[i * f + j]) * self.value[i * f + j];
      const float nr = (*norms)[i];
      for (int j = 0; j < f; ++j)
        g[i * f + j] += static_cast<float>((self.grad[i * f + j] - self.value[i * f + j] * dot) / nr);
    }
  });
}

Var slice_batch(const Var& x, int begin, int end) {
  const int n = x->value.dim(0);
  if (begin < 0 || end > n || begin >= end) throw ShapeError("slice_batch: bad range");
  const std::size_t row = x->value.numel() / n;
  auto shape = x->value.shape();
  shape[0] = end - begin;
  std::vector<float> v(x->value.values().begin() + begin * row, x->value.values().begin() + end * row);
  return make_node(Tensor(shape, std::move(v)), {x}, [begin, row](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) g[begin * row + i] += self.grad[i];
  });
}

Var concat_batch(const Var& a, const Var& b) {
  auto sa = a->value.shape(), sb = b->value.shape();
  if (sa.size() != sb.size() || !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1))
    throw ShapeError("concat_batch: trailing shapes differ");
  auto shape = sa;
  shape[0] += sb[0];
  std::vector<float> v(a->value.values());
  v.insert(v.end(), b->value.values().begin(), b->value.values().end());
  const std::size_t na = a->value.numel();
  return make_node(Tensor(shape, std::move(v)), {a, b}, [na](Node& self) {
    if (self.parents[0]->requires_grad) accumulate_into(*self.parents[0], self.grad.data().subspan(0, na));
    if (self.parents[1]->requires_grad) accumulate_into(*self.parents[1], self.grad.data().subspan(na));
  });
}

Var external_loss(std::vector<Var> inputs, double value, std::vector<Tensor> grads) {
  if (inputs.size() != grads.size()) throw ShapeError("external_loss: inputs/grads mismatch");
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i]->value.numel() != grads[i].numel()) throw ShapeError("external_loss: gradient shape mismatch");
  auto gs = std::make_shared<std::vector<Tensor>>(std::move(grads));
  return make_node(Tensor({1}, {static_cast<float>(value)}), std::move(inputs), [gs](Node& self) {
    const float up = self.grad[0];
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (!self.parents[k]->requires_grad) continue;
      auto g = self.parents[k]->ensure_grad().data();
      const auto& d = (*gs)[k];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * d[i];
    }
  });
}

Var weighted_sum(const std::vector<std::pair<float, Var>>& terms) {
  std::vector<Var> parents;
  std::vector<float> weights;
  double total = 0.0;
  for (const auto& [w, v] : terms) {
    if (v->value.numel() != 1) throw ShapeError("weighted_sum: terms must be scalars");
    total += static_cast<double>(w) * v->value[0];
    parents.push_back(v);
    weights.push_back(w);
  }
  return make_node(Tensor({1}, {static_cast<float>(total)}), parents, [weights](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (self.parents[k]->requires_grad) self.parents[k]->ensure_grad()[0] += weights[k] * self.grad[0];
  });
}

}  // namespace irisforge::nn
