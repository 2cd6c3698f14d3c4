#include <cmath>
#include <vector>

#include "irisforge/nn/kernels.hpp"

namespace irisforge::nn::reference {
namespace {

std::size_t idx4(int n, int c, int y, int x, int channels, int h, int w) {
  return ((static_cast<std::size_t>(n) * channels + c) * h + y) * w + x;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  const int ho = g.out_h(), wo = g.out_w(), k = g.kernel;
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double s = b.empty() ? 0.0 : b[o];
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.pad + ky;
                const int ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                s += static_cast<double>(x[idx4(n, c, iy, ix, g.in_channels, g.in_h, g.in_w)]) *
                     w[idx4(o, c, ky, kx, g.in_channels, k, k)];
              }
          y[idx4(n, o, oy, ox, g.out_channels, ho, wo)] = static_cast<float>(s);
        }
}

void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db) {
  const int ho = g.out_h(), wo = g.out_w(), k = g.kernel;
  std::vector<double> gx(x.size(), 0.0), gw(w.size(), 0.0), gb(g.out_channels, 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const double d = dy[idx4(n, o, oy, ox, g.out_channels, ho, wo)];
          gb[o] += d;
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.pad + ky;
                const int ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                const auto xi = idx4(n, c, iy, ix, g.in_channels, g.in_h, g.in_w);
                const auto wi = idx4(o, c, ky, kx, g.in_channels, k, k);
                gx[xi] += d * w[wi];
                gw[wi] += d * x[xi];
              }
        }
  if (!dx.empty())
    for (std::size_t i = 0; i < gx.size(); ++i) dx[i] = static_cast<float>(gx[i]);
  if (!dw.empty())
    for (std::size_t i = 0; i < gw.size(); ++i) dw[i] += static_cast<float>(gw[i]);
  if (!db.empty())
    for (int o = 0; o < g.out_channels; ++o) db[o] += static_cast<float>(gb[o]);
}

void conv_transpose2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> b, std::span<float> y) {
  const int ho = g.tout_h(), wo = g.tout_w(), k = g.kernel;
  std::vector<double> acc(y.size(), 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) acc[idx4(n, o, oy, ox, g.out_channels, ho, wo)] = b.empty() ? 0.0 : b[o];
  for (int n = 0; n < g.batch; ++n)
    for (int c = 0; c < g.in_channels; ++c)
      for (int iy = 0; iy < g.in_h; ++iy)
        for (int ix = 0; ix < g.in_w; ++ix) {
          const double xv = x[idx4(n, c, iy, ix, g.in_channels, g.in_h, g.in_w)];
          for (int o = 0; o < g.out_channels; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = iy * g.stride - g.pad + ky;
                const int ox = ix * g.stride - g.pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                acc[idx4(n, o, oy, ox, g.out_channels, ho, wo)] += xv * w[idx4(c, o, ky, kx, g.out_channels, k, k)];
              }
        }
  for (std::size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<float>(acc[i]);
}

void conv_transpose2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                               std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                               std::span<float> db) {
  const int ho = g.tout_h(), wo = g.tout_w(), k = g.kernel;
  std::vector<double> gx(x.size(), 0.0), gw(w.size(), 0.0), gb(g.out_channels, 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) gb[o] += dy[idx4(n, o, oy, ox, g.out_channels, ho, wo)];
  for (int n = 0; n < g.batch; ++n)
    for (int c = 0; c < g.in_channels; ++c)
      for (int iy = 0; iy < g.in_h; ++iy)
        for (int ix = 0; ix < g.in_w; ++ix) {
          const auto xi = idx4(n, c, iy, ix, g.in_channels, g.in_h, g.in_w);
          for (int o = 0; o < g.out_channels; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = iy * g.stride - g.pad + ky;
                const int ox = ix * g.stride - g.pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                const double d = dy[idx4(n, o, oy, ox, g.out_channels, ho, wo)];
                const auto wi = idx4(c, o, ky, kx, g.out_channels, k, k);
                gx[xi] += d * w[wi];
                gw[wi] += d * x[xi];
              }
        }
  if (!dx.empty())
    for (std::size_t i = 0; i < gx.size(); ++i) dx[i] = static_cast<float>(gx[i]);
  if (!dw.empty())
    for (std::size_t i = 0; i < gw.size(); ++i) dw[i] += static_cast<float>(gw[i]);
  if (!db.empty())
    for (int o = 0; o < g.out_channels; ++o) db[o] += static_cast<float>(gb[o]);
}

void linear_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  for (int n = 0; n < batch; ++n)
    for (int o = 0; o < out; ++o) {
      double s = b.empty() ? 0.0 : b[o];
      for (int i = 0; i < in; ++i) s += static_cast<double>(x[n * in + i]) * w[i * out + o];
      y[n * out + o] = static_cast<float>(s);
    }
}

void linear_backward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db) {
  for (int n = 0; n < batch; ++n)
    for (int i = 0; i < in; ++i) {
      double s = 0.0;
      for (int o = 0; o < out; ++o) s += static_cast<double>(w[i * out + o]) * dy[n * out + o];
      if (!dx.empty()) dx[n * in + i] = static_cast<float>(s);
    }
  if (!dw.empty())
    for (int i = 0; i < in; ++i)
      for (int o = 0; o < out; ++o) {
        double s = 0.0;
        for (int n = 0; n < batch; ++n) s += static_cast<double>(x[n * in + i]) * dy[n * out + o];
        dw[i * out + o] += static_cast<float>(s);
      }
  if (!db.empty())
    for (int o = 0; o < out; ++o) {
      double s = 0.0;
      for (int n = 0; n < batch; ++n) s += dy[n * out + o];
      db[o] += static_cast<float>(s);
    }
}

void instance_norm_forward(int batch, int channels, int spatial, float eps, std::span<const float> x,
                           std::span<const float> gamma, std::span<const float> beta, std::span<float> y,
                           std::span<float> stats) {
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * spatial;
      double mean = 0.0, sq = 0.0;
      for (int p = 0; p < spatial; ++p) mean += x[base + p];
      mean /= spatial;
      for (int p = 0; p < spatial; ++p) sq += (x[base + p] - mean) * (x[base + p] - mean);
      const double inv = 1.0 / std::sqrt(sq / spatial + eps);
      stats[2 * (n * channels + c)] = static_cast<float>(mean);
      stats[2 * (n * channels + c) + 1] = static_cast<float>(inv);
      for (int p = 0; p < spatial; ++p)
        y[base + p] = static_cast<float>(gamma[c] * (x[base + p] - mean) * inv + beta[c]);
    }
}

void instance_norm_backward(int batch, int channels, int spatial, std::span<const float> x,
                            std::span<const float> gamma, std::span<const float> stats,
                            std::span<const float> dy, std::span<float> dx, std::span<float> dgamma,
                            std::span<float> dbeta) {
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * spatial;
      const double m = stats[2 * (n * channels + c)], inv = stats[2 * (n * channels + c) + 1];
      double sd = 0.0, sdx = 0.0, sg = 0.0, sb = 0.0;
      for (int p = 0; p < spatial; ++p) {
        const double xh = (x[base + p] - m) * inv;
        sd += dy[base + p] * gamma[c];
        sdx += dy[base + p] * gamma[c] * xh;
        sg += dy[base + p] * xh;
        sb += dy[base + p];
      }
      if (!dx.empty())
        for (int p = 0; p < spatial; ++p) {
          const double xh = (x[base + p] - m) * inv;
          dx[base + p] = static_cast<float>(inv * (dy[base + p] * gamma[c] - sd / spatial - xh * sdx / spatial));
        }
      if (!dgamma.empty()) {
        dgamma[c] += static_cast<float>(sg);
        dbeta[c] += static_cast<float>(sb);
      }
    }
}

}  // namespace irisforge::nn::reference
