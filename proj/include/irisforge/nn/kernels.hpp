#pragma once

#include <span>

namespace irisforge::nn {

// NCHW convolution geometry. For transposed convolutions `in_*` is the input
// of the transposed op, and the weight is laid out [in_channels, out_channels, k, k].
struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_h = 1;
  int in_w = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  int tout_h() const { return (in_h - 1) * stride - 2 * pad + kernel; }
  int tout_w() const { return (in_w - 1) * stride - 2 * pad + kernel; }
};

// OpenMP kernels. Results are independent of the thread count: work is split
// per sample or per output row, and cross-sample reductions run in sample order.
namespace kernels {

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
// Any of dx / dw / db may be empty to skip it. dw and db accumulate; dx is overwritten.
void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db);

void conv_transpose2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> b, std::span<float> y);
void conv_transpose2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                               std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                               std::span<float> db);

// y[n, o] = sum_i x[n, i] w[i, o] + b[o]; weight stored input-major.
void linear_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
void linear_backward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db);

// Per-(sample, channel) normalization with affine gamma/beta over channels.
// `stats` receives mean and inverse std per (n, c), 2*N*C entries.
void instance_norm_forward(int batch, int channels, int spatial, float eps, std::span<const float> x,
                           std::span<const float> gamma, std::span<const float> beta, std::span<float> y,
                           std::span<float> stats);
void instance_norm_backward(int batch, int channels, int spatial, std::span<const float> x,
                            std::span<const float> gamma, std::span<const float> stats,
                            std::span<const float> dy, std::span<float> dx, std::span<float> dgamma,
                            std::span<float> dbeta);

}  // namespace kernels

// Straightforward serial loops with double accumulation; the correctness
// reference for the kernels above and the baseline in the benchmark.
namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db);
void conv_transpose2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> b, std::span<float> y);
void conv_transpose2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                               std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                               std::span<float> db);
void linear_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
void linear_backward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db);
void instance_norm_forward(int batch, int channels, int spatial, float eps, std::span<const float> x,
                           std::span<const float> gamma, std::span<const float> beta, std::span<float> y,
                           std::span<float> stats);
void instance_norm_backward(int batch, int channels, int spatial, std::span<const float> x,
                            std::span<const float> gamma, std::span<const float> stats,
                            std::span<const float> dy, std::span<float> dx, std::span<float> dgamma,
                            std::span<float> dbeta);

}  // namespace reference

void set_num_threads(int threads);
int num_threads();

}  // namespace irisforge::nn
