#include "irisforge/warp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "irisforge/error.hpp"

namespace irisforge {
namespace {

void check_call(const WarpParams& p, int m, std::span<const double> z) {
  if (m < 0 || m >= p.warps) throw IndexError("warp index " + std::to_string(m) + " out of range");
  if (static_cast<int>(z.size()) != p.dim) throw ShapeError("latent code dimension mismatch");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

}  // namespace

WarpParams::WarpParams(int m, int k, int d)
    : warps(m),
      rbfs(k),
      dim(d),
      centers(static_cast<std::size_t>(m) * k * d, 0.0),
      weights(static_cast<std::size_t>(m) * k, 0.0),
      scales(static_cast<std::size_t>(m) * k, 1.0) {}

void WarpParams::validate() const {
  if (warps < 1 || rbfs < 1 || dim < 1) throw ConfigError("warp shape must be positive");
  const auto mk = static_cast<std::size_t>(warps) * rbfs;
  if (centers.size() != mk * dim || weights.size() != mk || scales.size() != mk)
    throw ShapeError("warp parameter arrays inconsistent with (M, K, d)");
  for (double u : scales)
    if (!(u > 0.0)) throw ConfigError("warp scales must be positive");
}

double eval_warp(const WarpParams& p, int m, std::span<const double> z) {
  check_call(p, m, z);
  double f = 0.0;
  for (int k = 0; k < p.rbfs; ++k)
    f += p.weight(m, k) * std::exp(-p.scale(m, k) * squared_distance(z, p.center(m, k)));
  return f;
}

LatentCode warp_gradient(const WarpParams& p, int m, std::span<const double> z) {
  check_call(p, m, z);
  LatentCode g(p.dim, 0.0);
  for (int k = 0; k < p.rbfs; ++k) {
    const auto v = p.center(m, k);
    const double u = p.scale(m, k);
    const double coef = -2.0 * p.weight(m, k) * u * std::exp(-u * squared_distance(z, v));
    for (int i = 0; i < p.dim; ++i) g[i] += coef * (z[i] - v[i]);
  }
  return g;
}

LatentCode shift_code(const WarpParams& p, int m, std::span<const double> z, double eps) {
  check_call(p, m, z);
  LatentCode out(z.begin(), z.end());
  if (eps == 0.0) return out;
  const LatentCode g = warp_gradient(p, m, z);
  double norm = 0.0;
  for (double x : g) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > kGradientFloor)) throw DegenerateGradient("warp gradient below floor");
  for (int i = 0; i < p.dim; ++i) out[i] += eps * g[i] / norm;
  return out;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

WarpParams init_warp_params(int warps, int rbfs, int dim, std::uint64_t seed) {
  if (warps < 1 || rbfs < 1 || dim < 1) throw ConfigError("warp shape must be positive");
  WarpParams p(warps, rbfs, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& c : p.centers) c = normal(rng);
  for (auto& b : p.weights) b = normal(rng);
  // E||z - v||^2 = 2d for unit-Gaussian z and v; widths shrink with d so the
  // RBFs neither underflow nor flatten out.
  for (auto& u : p.scales) u = softplus(normal(rng)) / dim;
  return p;
}

void shift_code_backward(const WarpParams& p, int m, std::span<const double> z, double eps,
                         std::span<const double> grad_out, std::span<double> grad_z, WarpGrads& grads) {
  check_call(p, m, z);
  const int d = p.dim;
  for (int i = 0; i < d; ++i) grad_z[i] += grad_out[i];
  if (eps == 0.0) return;

  const LatentCode g = warp_gradient(p, m, z);
  double norm = 0.0;
  for (double x : g) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > kGradientFloor)) throw DegenerateGradient("warp gradient below floor");

  // dL/dg = eps (I - n n^T) a / ||g||
  double na = 0.0;
  for (int i = 0; i < d; ++i) na += g[i] / norm * grad_out[i];
  std::vector<double> c(d);
  for (int i = 0; i < d; ++i) c[i] = eps * (grad_out[i] - g[i] / norm * na) / norm;

  std::vector<double> r(d);
  for (int k = 0; k < p.rbfs; ++k) {
    const auto v = p.center(m, k);
    const double b = p.weight(m, k);
    const double u = p.scale(m, k);
    double s = 0.0, cr = 0.0;
    for (int i = 0; i < d; ++i) {
      r[i] = z[i] - v[i];
      s += r[i] * r[i];
      cr += c[i] * r[i];
    }
    const double e = std::exp(-u * s);
    const std::size_t mk = static_cast<std::size_t>(m) * p.rbfs + k;
    grads.weights[mk] += -2.0 * u * e * cr;
    grads.scales[mk] += -2.0 * b * e * (1.0 - u * s) * cr;
    // d g_k / d r_k = -2 b u e (I - 2 u r r^T), symmetric.
    const double a = -2.0 * b * u * e;
    double* gc = grads.centers.data() + mk * d;
    for (int i = 0; i < d; ++i) {
      const double gr = a * (c[i] - 2.0 * u * r[i] * cr);
      grad_z[i] += gr;
      gc[i] -= gr;
    }
  }
}

}  // namespace irisforge
