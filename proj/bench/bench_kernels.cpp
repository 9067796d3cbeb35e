#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "teamemb/kernels.hpp"

using namespace teamemb::kernels;

namespace {

// Layer shapes the network runs at a 128x128 working resolution.
ConvGeometry layer(int index) {
  switch (index) {
    case 0: return {3, 128, 128, 16, 3, 3, 1, 1};
    case 1: return {16, 64, 64, 32, 3, 3, 1, 1};
    default: return {32, 32, 32, 32, 3, 3, 1, 1};
  }
}

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

struct ConvData {
  ConvGeometry g;
  std::vector<float> in, w, b, out, gin, gw, gb;
  explicit ConvData(int index) : g(layer(index)) {
    const std::size_t n_in = std::size_t(g.in_channels) * g.in_height * g.in_width;
    const std::size_t n_out = std::size_t(g.out_channels) * g.out_height() * g.out_width();
    in = random_vec(n_in, 1);
    w = random_vec(std::size_t(g.out_channels) * g.patch_size(), 2);
    b = random_vec(g.out_channels, 3);
    out = random_vec(n_out, 4);
    gin.assign(n_in, 0);
    gw.assign(w.size(), 0);
    gb.assign(b.size(), 0);
  }
  double flops() const { return 2.0 * g.out_channels * g.out_height() * g.out_width() * g.patch_size(); }
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  ConvData d(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel)
      parallel::conv2d_forward<float>(d.g, d.in, d.w, d.b, d.out);
    else
      serial::conv2d_forward<float>(d.g, d.in, d.w, d.b, d.out);
    benchmark::DoNotOptimize(d.out.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(d.flops() * state.iterations() / 1e9, benchmark::Counter::kIsRate);
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  ConvData d(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel)
      parallel::conv2d_backward<float>(d.g, d.in, d.w, d.out, d.gin, d.gw, d.gb);
    else
      serial::conv2d_backward<float>(d.g, d.in, d.w, d.out, d.gin, d.gw, d.gb);
    benchmark::DoNotOptimize(d.gw.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2 * d.flops() * state.iterations() / 1e9, benchmark::Counter::kIsRate);
}

template <bool Parallel>
void BM_Upsample(benchmark::State& state) {
  const int c = 24, h = 32, w = 32, f = 4;
  const auto in = random_vec(std::size_t(c) * h * w, 5);
  std::vector<float> out(std::size_t(c) * h * w * f * f);
  for (auto _ : state) {
    if constexpr (Parallel)
      parallel::upsample_bilinear_forward<float>(c, h, w, f, in, out);
    else
      serial::upsample_bilinear_forward<float>(c, h, w, f, in, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->DenseRange(0, 2);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->DenseRange(0, 2);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->DenseRange(0, 2);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->DenseRange(0, 2);
BENCHMARK(BM_Upsample<false>)->Name("upsample_bilinear/serial");
BENCHMARK(BM_Upsample<true>)->Name("upsample_bilinear/parallel");

BENCHMARK_MAIN();
