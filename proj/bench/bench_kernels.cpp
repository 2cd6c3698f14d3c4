#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "irisforge/irisproc.hpp"
#include "irisforge/nn/kernels.hpp"
#include "irisforge/toydata.hpp"

using namespace irisforge;
using nn::ConvGeometry;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// First encoder stage at training batch size: 8 x 1 x 64 x 64 -> 8 x 8 x 32 x 32.
ConvGeometry encoder_stage(int batch) { return {batch, 1, 64, 64, 8, 4, 2, 1}; }
// Last generator stage: 8 x 8 x 32 x 32 -> 8 x 1 x 64 x 64.
ConvGeometry decoder_stage(int batch) { return {batch, 8, 32, 32, 1, 4, 2, 1}; }

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& st) {
  const auto g = encoder_stage(static_cast<int>(st.range(0)));
  const auto x = noise(static_cast<std::size_t>(g.batch) * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = noise(static_cast<std::size_t>(g.out_channels) * g.in_channels * g.kernel * g.kernel, 2);
  const auto b = noise(g.out_channels, 3);
  std::vector<float> y(static_cast<std::size_t>(g.batch) * g.out_channels * g.out_h() * g.out_w());
  for (auto _ : st) {
    if constexpr (Parallel)
      nn::kernels::conv2d_forward(g, x, w, b, y);
    else
      nn::reference::conv2d_forward(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& st) {
  const auto g = encoder_stage(static_cast<int>(st.range(0)));
  const auto x = noise(static_cast<std::size_t>(g.batch) * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = noise(static_cast<std::size_t>(g.out_channels) * g.in_channels * g.kernel * g.kernel, 2);
  const auto dy = noise(static_cast<std::size_t>(g.batch) * g.out_channels * g.out_h() * g.out_w(), 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : st) {
    if constexpr (Parallel)
      nn::kernels::conv2d_backward(g, x, w, dy, dx, dw, db);
    else
      nn::reference::conv2d_backward(g, x, w, dy, dx, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void BM_ConvTransposeForward(benchmark::State& st) {
  const auto g = decoder_stage(static_cast<int>(st.range(0)));
  const auto x = noise(static_cast<std::size_t>(g.batch) * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = noise(static_cast<std::size_t>(g.in_channels) * g.out_channels * g.kernel * g.kernel, 2);
  const auto b = noise(g.out_channels, 3);
  std::vector<float> y(static_cast<std::size_t>(g.batch) * g.out_channels * g.tout_h() * g.tout_w());
  for (auto _ : st) {
    if constexpr (Parallel)
      nn::kernels::conv_transpose2d_forward(g, x, w, b, y);
    else
      nn::reference::conv_transpose2d_forward(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Linear(benchmark::State& st) {
  const int batch = static_cast<int>(st.range(0)), in = 1024, out = 128;
  const auto x = noise(static_cast<std::size_t>(batch) * in, 1);
  const auto w = noise(static_cast<std::size_t>(in) * out, 2);
  const auto b = noise(out, 3);
  std::vector<float> y(static_cast<std::size_t>(batch) * out);
  for (auto _ : st) {
    if constexpr (Parallel)
      nn::kernels::linear_forward(batch, in, out, x, w, b, y);
    else
      nn::reference::linear_forward(batch, in, out, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_InstanceNorm(benchmark::State& st) {
  const int batch = static_cast<int>(st.range(0)), channels = 16, spatial = 32 * 32;
  const auto x = noise(static_cast<std::size_t>(batch) * channels * spatial, 1);
  const std::vector<float> gamma(channels, 1.0f), beta(channels, 0.0f);
  std::vector<float> y(x.size()), stats(2 * batch * channels);
  for (auto _ : st) {
    if constexpr (Parallel)
      nn::kernels::instance_norm_forward(batch, channels, spatial, 1e-5f, x, gamma, beta, y, stats);
    else
      nn::reference::instance_norm_forward(batch, channels, spatial, 1e-5f, x, gamma, beta, y, stats);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_IrisTemplate(benchmark::State& st) {
  const auto r = render_toy_iris(1, AttributeVector::from_combination(7), 64, 1);
  for (auto _ : st) benchmark::DoNotOptimize(extract_template(r.image));
}

}  // namespace

BENCHMARK(BM_Conv2dForward<false>)->Name("conv2d_forward/serial")->Arg(8);
BENCHMARK(BM_Conv2dForward<true>)->Name("conv2d_forward/omp")->Arg(8);
BENCHMARK(BM_Conv2dBackward<false>)->Name("conv2d_backward/serial")->Arg(8);
BENCHMARK(BM_Conv2dBackward<true>)->Name("conv2d_backward/omp")->Arg(8);
BENCHMARK(BM_ConvTransposeForward<false>)->Name("conv_transpose2d_forward/serial")->Arg(8);
BENCHMARK(BM_ConvTransposeForward<true>)->Name("conv_transpose2d_forward/omp")->Arg(8);
BENCHMARK(BM_Linear<false>)->Name("linear_forward/serial")->Arg(48);
BENCHMARK(BM_Linear<true>)->Name("linear_forward/omp")->Arg(48);
BENCHMARK(BM_InstanceNorm<false>)->Name("instance_norm_forward/serial")->Arg(8);
BENCHMARK(BM_InstanceNorm<true>)->Name("instance_norm_forward/omp")->Arg(8);
BENCHMARK(BM_IrisTemplate)->Name("iris_template");

BENCHMARK_MAIN();
