#include <benchmark/benchmark.h>

#include <vector>

#include "lp/kernels.hpp"
#include "lp/reference_kernels.hpp"
#include "lp/rng.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    lp::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// Discriminator-like layer: 32 filters of 5x10 over a 1x128x80 spectrogram,
// stride 2, same-pad.
lp::kern::ConvGeom disc_geom() {
    lp::kern::ConvGeom g;
    g.ci = 1;
    g.hi = 128;
    g.wi = 80;
    g.co = 32;
    g.kh = 5;
    g.kw = 10;
    g.sh = 2;
    g.sw = 2;
    g.ph = 1;
    g.pw = 4;
    g.ho = 64;
    g.wo = 40;
    return g;
}

// Mid-network layer with many channels on both sides.
lp::kern::ConvGeom mid_geom() {
    lp::kern::ConvGeom g;
    g.ci = 32;
    g.hi = 64;
    g.wi = 40;
    g.co = 64;
    g.kh = 5;
    g.kw = 10;
    g.sh = 2;
    g.sw = 2;
    g.ph = 1;
    g.pw = 4;
    g.ho = 32;
    g.wo = 20;
    return g;
}

void conv_args(const lp::kern::ConvGeom& g, std::vector<double>& x, std::vector<double>& w,
               std::vector<double>& y) {
    x = random_vec(static_cast<std::size_t>(g.ci) * g.hi * g.wi, 11);
    w = random_vec(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, 12);
    y.assign(static_cast<std::size_t>(g.co) * g.ho * g.wo, 0.0);
}

void BM_Conv2dParallel(benchmark::State& state) {
    lp::kern::ConvGeom g = state.range(0) == 0 ? disc_geom() : mid_geom();
    std::vector<double> x, w, y, scratch;
    conv_args(g, x, w, y);
    for (auto _ : state) {
        lp::kern::conv2d(g, x.data(), w.data(), y.data(), scratch);
        benchmark::DoNotOptimize(y.data());
    }
    double macs = 2.0 * g.co * g.ho * g.wo * g.ci * g.kh * g.kw;
    state.counters["flops"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Conv2dReference(benchmark::State& state) {
    lp::kern::ConvGeom g = state.range(0) == 0 ? disc_geom() : mid_geom();
    std::vector<double> x, w, y;
    conv_args(g, x, w, y);
    for (auto _ : state) {
        lp::refkern::conv2d(g, x.data(), w.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    double macs = 2.0 * g.co * g.ho * g.wo * g.ci * g.kh * g.kw;
    state.counters["flops"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvInputGradParallel(benchmark::State& state) {
    lp::kern::ConvGeom g = mid_geom();
    std::vector<double> gy = random_vec(static_cast<std::size_t>(g.co) * g.ho * g.wo, 21);
    std::vector<double> w = random_vec(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, 22);
    std::vector<double> xg(static_cast<std::size_t>(g.ci) * g.hi * g.wi, 0.0);
    std::vector<double> scratch;
    for (auto _ : state) {
        lp::kern::conv2d_input_grad(g, gy.data(), w.data(), xg.data(), scratch);
        benchmark::DoNotOptimize(xg.data());
    }
}

void BM_ConvInputGradReference(benchmark::State& state) {
    lp::kern::ConvGeom g = mid_geom();
    std::vector<double> gy = random_vec(static_cast<std::size_t>(g.co) * g.ho * g.wo, 21);
    std::vector<double> w = random_vec(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, 22);
    std::vector<double> xg(static_cast<std::size_t>(g.ci) * g.hi * g.wi, 0.0);
    for (auto _ : state) {
        lp::refkern::conv2d_input_grad(g, gy.data(), w.data(), xg.data());
        benchmark::DoNotOptimize(xg.data());
    }
}

void BM_GemmParallel(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<double> a = random_vec(static_cast<std::size_t>(n) * n, 31);
    std::vector<double> b = random_vec(static_cast<std::size_t>(n) * n, 32);
    std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
    for (auto _ : state) {
        lp::kern::gemm(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["flops"] =
        benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_GemmReference(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<double> a = random_vec(static_cast<std::size_t>(n) * n, 31);
    std::vector<double> b = random_vec(static_cast<std::size_t>(n) * n, 32);
    std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
    for (auto _ : state) {
        lp::refkern::gemm(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["flops"] =
        benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}

BENCHMARK(BM_Conv2dParallel)->Arg(0)->Arg(1);
BENCHMARK(BM_Conv2dReference)->Arg(0)->Arg(1);
BENCHMARK(BM_ConvInputGradParallel);
BENCHMARK(BM_ConvInputGradReference);
BENCHMARK(BM_GemmParallel)->Arg(128)->Arg(512);
BENCHMARK(BM_GemmReference)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
