#include "irisforge/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <omp.h>

namespace irisforge::nn {
namespace {

// cols[(c*k + ky)*k + kx][oy*Wo + ox]
void im2col(const ConvGeometry& g, const float* x, float* cols) {
  const int ho = g.out_h(), wo = g.out_w(), k = g.kernel;
  const int p_count = ho * wo;
  for (int c = 0; c < g.in_channels; ++c) {
    const float* xc = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * p_count;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* out = row + oy * wo;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(out, out + wo, 0.0f);
            continue;
          }
          const float* xr = xc + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            out[ox] = (ix >= 0 && ix < g.in_w) ? xr[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Transposed layout colsT[p][(c*k + ky)*k + kx].
void im2col_t(const ConvGeometry& g, const float* x, float* cols_t) {
  const int ho = g.out_h(), wo = g.out_w(), k = g.kernel;
  const int ckk = g.in_channels * k * k;
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      float* row = cols_t + static_cast<std::size_t>(oy * wo + ox) * ckk;
      for (int c = 0; c < g.in_channels; ++c) {
        const float* xc = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            const bool inside = iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w;
            row[(c * k + ky) * k + kx] = inside ? xc[static_cast<std::size_t>(iy) * g.in_w + ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Accumulates cols back onto an image already holding the base values.
void col2im(const ConvGeometry& g, const float* cols, float* x) {
  const int ho = g.out_h(), wo = g.out_w(), k = g.kernel;
  const int p_count = ho * wo;
  for (int c = 0; c < g.in_channels; ++c) {
    float* xc = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * p_count;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          float* xr = xc + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) xr[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

// C[MxN] += A[MxK] * B[KxN]
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[MxN] += A^T * B with A stored [KxM], B [KxN]
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float av = a[static_cast<std::size_t>(p) * m + i];
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

ConvGeometry transposed_as_conv(const ConvGeometry& g) {
  ConvGeometry c;
  c.batch = g.batch;
  c.in_channels = g.out_channels;
  c.in_h = g.tout_h();
  c.in_w = g.tout_w();
  c.out_channels = g.in_channels;
  c.kernel = g.kernel;
  c.stride = g.stride;
  c.pad = g.pad;
  return c;
}

void bias_grad(int batch, int channels, int spatial, const float* dy, float* db) {
  for (int o = 0; o < channels; ++o) {
    double s = 0.0;
    for (int n = 0; n < batch; ++n) {
      const float* d = dy + (static_cast<std::size_t>(n) * channels + o) * spatial;
      for (int p = 0; p < spatial; ++p) s += d[p];
    }
    db[o] += static_cast<float>(s);
  }
}

}  // namespace

void set_num_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int num_threads() { return omp_get_max_threads(); }

namespace kernels {

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  const int p_count = g.out_h() * g.out_w();
  const int ckk = g.in_channels * g.kernel * g.kernel;
  const std::size_t in_stride = static_cast<std::size_t>(g.in_channels) * g.in_h * g.in_w;
  const std::size_t out_stride = static_cast<std::size_t>(g.out_channels) * p_count;
#pragma omp parallel
  {
    std::vector<float> cols(static_cast<std::size_t>(ckk) * p_count);
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      im2col(g, x.data() + n * in_stride, cols.data());
      float* yn = y.data() + n * out_stride;
      for (int o = 0; o < g.out_channels; ++o)
        std::fill(yn + static_cast<std::size_t>(o) * p_count, yn + static_cast<std::size_t>(o + 1) * p_count,
                  b.empty() ? 0.0f : b[o]);
      gemm_nn(g.out_channels, p_count, ckk, w.data(), cols.data(), yn);
    }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db) {
  const int p_count = g.out_h() * g.out_w();
  const int ckk = g.in_channels * g.kernel * g.kernel;
  const std::size_t in_stride = static_cast<std::size_t>(g.in_channels) * g.in_h * g.in_w;
  const std::size_t out_stride = static_cast<std::size_t>(g.out_channels) * p_count;

  if (!dx.empty()) {
#pragma omp parallel
    {
      std::vector<float> dcols(static_cast<std::size_t>(ckk) * p_count);
#pragma omp for schedule(static)
      for (int n = 0; n < g.batch; ++n) {
        std::fill(dcols.begin(), dcols.end(), 0.0f);
        gemm_tn(ckk, p_count, g.out_channels, w.data(), dy.data() + n * out_stride, dcols.data());
        float* dxn = dx.data() + n * in_stride;
        std::fill(dxn, dxn + in_stride, 0.0f);
        col2im(g, dcols.data(), dxn);
      }
    }
  }
  if (!dw.empty()) {
    std::vector<float> cols_t(static_cast<std::size_t>(g.batch) * p_count * ckk);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < g.batch; ++n)
      im2col_t(g, x.data() + n * in_stride, cols_t.data() + static_cast<std::size_t>(n) * p_count * ckk);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < g.out_channels; ++o) {
      float* dwo = dw.data() + static_cast<std::size_t>(o) * ckk;
      for (int n = 0; n < g.batch; ++n) {
        const float* d = dy.data() + n * out_stride + static_cast<std::size_t>(o) * p_count;
        gemm_nn(1, ckk, p_count, d, cols_t.data() + static_cast<std::size_t>(n) * p_count * ckk, dwo);
      }
    }
  }
  if (!db.empty()) bias_grad(g.batch, g.out_channels, p_count, dy.data(), db.data());
}

void conv_transpose2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> b, std::span<float> y) {
  const ConvGeometry c = transposed_as_conv(g);
  const int p_in = g.in_h * g.in_w;
  const int okk = g.out_channels * g.kernel * g.kernel;
  const std::size_t in_stride = static_cast<std::size_t>(g.in_channels) * p_in;
  const int p_out = g.tout_h() * g.tout_w();
  const std::size_t out_stride = static_cast<std::size_t>(g.out_channels) * p_out;
#pragma omp parallel
  {
    std::vector<float> cols(static_cast<std::size_t>(okk) * p_in);
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      std::fill(cols.begin(), cols.end(), 0.0f);
      gemm_tn(okk, p_in, g.in_channels, w.data(), x.data() + n * in_stride, cols.data());
      float* yn = y.data() + n * out_stride;
      for (int o = 0; o < g.out_channels; ++o)
        std::fill(yn + static_cast<std::size_t>(o) * p_out, yn + static_cast<std::size_t>(o + 1) * p_out,
                  b.empty() ? 0.0f : b[o]);
      col2im(c, cols.data(), yn);
    }
  }
}

void conv_transpose2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                               std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                               std::span<float> db) {
  const ConvGeometry c = transposed_as_conv(g);
  const int p_in = g.in_h * g.in_w;
  const int okk = g.out_channels * g.kernel * g.kernel;
  const std::size_t in_stride = static_cast<std::size_t>(g.in_channels) * p_in;
  const int p_out = g.tout_h() * g.tout_w();
  const std::size_t out_stride = static_cast<std::size_t>(g.out_channels) * p_out;

  if (!dx.empty()) {
#pragma omp parallel
    {
      std::vector<float> cols(static_cast<std::size_t>(okk) * p_in);
#pragma omp for schedule(static)
      for (int n = 0; n < g.batch; ++n) {
        im2col(c, dy.data() + n * out_stride, cols.data());
        float* dxn = dx.data() + n * in_stride;
        std::fill(dxn, dxn + in_stride, 0.0f);
        gemm_nn(g.in_channels, p_in, okk, w.data(), cols.data(), dxn);
      }
    }
  }
  if (!dw.empty()) {
    std::vector<float> cols_t(static_cast<std::size_t>(g.batch) * p_in * okk);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < g.batch; ++n)
      im2col_t(c, dy.data() + n * out_stride, cols_t.data() + static_cast<std::size_t>(n) * p_in * okk);
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < g.in_channels; ++ci) {
      float* dwi = dw.data() + static_cast<std::size_t>(ci) * okk;
      for (int n = 0; n < g.batch; ++n) {
        const float* xn = x.data() + n * in_stride + static_cast<std::size_t>(ci) * p_in;
        gemm_nn(1, okk, p_in, xn, cols_t.data() + static_cast<std::size_t>(n) * p_in * okk, dwi);
      }
    }
  }
  if (!db.empty()) bias_grad(g.batch, g.out_channels, p_out, dy.data(), db.data());
}

void linear_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    float* yn = y.data() + static_cast<std::size_t>(n) * out;
    for (int o = 0; o < out; ++o) yn[o] = b.empty() ? 0.0f : b[o];
    gemm_nn(1, out, in, x.data() + static_cast<std::size_t>(n) * in, w.data(), yn);
  }
}

void linear_backward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db) {
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < batch; ++n) {
      const float* d = dy.data() + static_cast<std::size_t>(n) * out;
      float* dxn = dx.data() + static_cast<std::size_t>(n) * in;
      for (int i = 0; i < in; ++i) {
        const float* wi = w.data() + static_cast<std::size_t>(i) * out;
        float s = 0.0f;
        for (int o = 0; o < out; ++o) s += wi[o] * d[o];
        dxn[i] = s;
      }
    }
  }
  if (!dw.empty()) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in; ++i) {
      float* dwi = dw.data() + static_cast<std::size_t>(i) * out;
      for (int n = 0; n < batch; ++n) {
        const float xv = x[static_cast<std::size_t>(n) * in + i];
        const float* d = dy.data() + static_cast<std::size_t>(n) * out;
        for (int o = 0; o < out; ++o) dwi[o] += xv * d[o];
      }
    }
  }
  if (!db.empty()) bias_grad(batch, out, 1, dy.data(), db.data());
}

void instance_norm_forward(int batch, int channels, int spatial, float eps, std::span<const float> x,
                           std::span<const float> gamma, std::span<const float> beta, std::span<float> y,
                           std::span<float> stats) {
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < batch * channels; ++nc) {
    const int c = nc % channels;
    const float* xs = x.data() + static_cast<std::size_t>(nc) * spatial;
    float* ys = y.data() + static_cast<std::size_t>(nc) * spatial;
    double mean = 0.0;
    for (int p = 0; p < spatial; ++p) mean += xs[p];
    mean /= spatial;
    double var = 0.0;
    for (int p = 0; p < spatial; ++p) var += (xs[p] - mean) * (xs[p] - mean);
    var /= spatial;
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    const float m = static_cast<float>(mean);
    stats[2 * nc] = m;
    stats[2 * nc + 1] = inv;
    const float ga = gamma[c], be = beta[c];
    for (int p = 0; p < spatial; ++p) ys[p] = ga * (xs[p] - m) * inv + be;
  }
}

void instance_norm_backward(int batch, int channels, int spatial, std::span<const float> x,
                            std::span<const float> gamma, std::span<const float> stats,
                            std::span<const float> dy, std::span<float> dx, std::span<float> dgamma,
                            std::span<float> dbeta) {
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < batch * channels; ++nc) {
      const int c = nc % channels;
      const float* xs = x.data() + static_cast<std::size_t>(nc) * spatial;
      const float* ds = dy.data() + static_cast<std::size_t>(nc) * spatial;
      float* dxs = dx.data() + static_cast<std::size_t>(nc) * spatial;
      const float m = stats[2 * nc], inv = stats[2 * nc + 1];
      double sum_d = 0.0, sum_dx = 0.0;
      for (int p = 0; p < spatial; ++p) {
        const double dh = static_cast<double>(ds[p]) * gamma[c];
        sum_d += dh;
        sum_dx += dh * (xs[p] - m) * inv;
      }
      const double a = sum_d / spatial, bcoef = sum_dx / spatial;
      for (int p = 0; p < spatial; ++p) {
        const double xh = (xs[p] - m) * inv;
        dxs[p] = static_cast<float>(inv * (ds[p] * gamma[c] - a - xh * bcoef));
      }
    }
  }
  if (!dgamma.empty()) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
      double sg = 0.0, sb = 0.0;
      for (int n = 0; n < batch; ++n) {
        const int nc = n * channels + c;
        const float* xs = x.data() + static_cast<std::size_t>(nc) * spatial;
        const float* ds = dy.data() + static_cast<std::size_t>(nc) * spatial;
        const float m = stats[2 * nc], inv = stats[2 * nc + 1];
        for (int p = 0; p < spatial; ++p) {
          sg += static_cast<double>(ds[p]) * (xs[p] - m) * inv;
          sb += ds[p];
        }
      }
      dgamma[c] += static_cast<float>(sg);
      dbeta[c] += static_cast<float>(sb);
    }
  }
}

}  // namespace kernels
}  // namespace irisforge::nn
