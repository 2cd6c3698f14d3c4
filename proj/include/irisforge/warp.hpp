#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace irisforge {

using LatentCode = std::vector<double>;

// M warp functions over R^d, each a sum of K Gaussian RBFs:
//   f_m(z) = sum_k b_mk exp(-u_mk ||z - v_mk||^2)
struct WarpParams {
  int warps = 0;    // M
  int rbfs = 0;     // K
  int dim = 0;      // d
  std::vector<double> centers;  // M*K*d
  std::vector<double> weights;  // M*K
  std::vector<double> scales;   // M*K, strictly positive

  WarpParams() = default;
  WarpParams(int m, int k, int d);

  std::span<const double> center(int m, int k) const {
    return {centers.data() + (static_cast<std::size_t>(m) * rbfs + k) * dim, static_cast<std::size_t>(dim)};
  }
  double weight(int m, int k) const { return weights[static_cast<std::size_t>(m) * rbfs + k]; }
  double scale(int m, int k) const { return scales[static_cast<std::size_t>(m) * rbfs + k]; }

  void validate() const;  // throws ShapeError / ConfigError
};

inline constexpr double kGradientFloor = 1e-8;

double eval_warp(const WarpParams& p, int m, std::span<const double> z);
LatentCode warp_gradient(const WarpParams& p, int m, std::span<const double> z);

// z + eps * grad f_m(z) / ||grad f_m(z)||. Throws DegenerateGradient when the
// gradient norm is below kGradientFloor. eps == 0 returns z unchanged.
LatentCode shift_code(const WarpParams& p, int m, std::span<const double> z, double eps);

// Centers and weights ~ N(0,1); scales = softplus(N(0,1)) / dim.
WarpParams init_warp_params(int warps, int rbfs, int dim, std::uint64_t seed);

double softplus(double x);
double softplus_inverse(double y);

// Vector-Jacobian product of shift_code. Given upstream dL/dz_bar, accumulates
// into dL/dz and into the parameter gradients (same layout as WarpParams;
// scale gradients are with respect to u, not its softplus pre-image).
struct WarpGrads {
  std::vector<double> centers;
  std::vector<double> weights;
  std::vector<double> scales;
  explicit WarpGrads(const WarpParams& p)
      : centers(p.centers.size(), 0.0), weights(p.weights.size(), 0.0), scales(p.scales.size(), 0.0) {}
};

void shift_code_backward(const WarpParams& p, int m, std::span<const double> z, double eps,
                         std::span<const double> grad_out, std::span<double> grad_z, WarpGrads& grads);

}  // namespace irisforge
