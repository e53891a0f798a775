#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <omp.h>

#include <cstring>
#include <vector>

#include "doctest.h"
#include "lp/kernels.hpp"
#include "lp/reference_kernels.hpp"
#include "lp/rng.hpp"

using lp::Rng;
using lp::kern::ConvGeom;
using lp::kern::PoolGeom;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = std::abs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

ConvGeom make_geom(int ci, int hi, int wi, int co, int kh, int kw, int sh, int sw, int ph, int pw) {
    ConvGeom g;
    g.ci = ci;
    g.hi = hi;
    g.wi = wi;
    g.co = co;
    g.kh = kh;
    g.kw = kw;
    g.sh = sh;
    g.sw = sw;
    g.ph = ph;
    g.pw = pw;
    g.ho = (hi + 2 * ph >= kh) ? (hi + ph + ph - kh) / sh + 1 : 1;
    g.wo = (wi + 2 * pw >= kw) ? (wi + pw + pw - kw) / sw + 1 : 1;
    return g;
}

std::vector<ConvGeom> conv_cases() {
    std::vector<ConvGeom> cases;
    cases.push_back(make_geom(1, 9, 9, 4, 3, 3, 1, 1, 0, 0));
    cases.push_back(make_geom(3, 12, 10, 5, 3, 3, 1, 1, 0, 0));
    cases.push_back(make_geom(2, 16, 12, 6, 5, 5, 2, 2, 2, 2));
    cases.push_back(make_geom(4, 8, 5, 3, 5, 10, 2, 2, 1, 4));   // wider filter than input
    cases.push_back(make_geom(1, 128, 80, 8, 5, 10, 2, 2, 1, 4));  // discriminator entry shape
    cases.push_back(make_geom(5, 7, 7, 2, 1, 1, 1, 1, 0, 0));
    cases.push_back(make_geom(2, 11, 13, 3, 4, 2, 3, 2, 1, 0));
    return cases;
}

}  // namespace

TEST_CASE("conv2d matches the reference implementation") {
    for (const ConvGeom& g : conv_cases()) {
        CAPTURE(g.ci);
        CAPTURE(g.hi);
        CAPTURE(g.kh);
        auto x = random_vec(static_cast<std::size_t>(g.ci) * g.hi * g.wi, 100 + g.hi);
        auto w = random_vec(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, 200 + g.kh);
        std::vector<double> fast(static_cast<std::size_t>(g.co) * g.ho * g.wo, -1.0);
        std::vector<double> ref(fast.size(), -2.0);
        std::vector<double> scratch;
        lp::kern::conv2d(g, x.data(), w.data(), fast.data(), scratch);
        lp::refkern::conv2d(g, x.data(), w.data(), ref.data());
        CHECK(max_abs_diff(fast, ref) < 1e-10);
    }
}

TEST_CASE("conv2d_input_grad matches the reference implementation") {
    for (const ConvGeom& g : conv_cases()) {
        auto gy = random_vec(static_cast<std::size_t>(g.co) * g.ho * g.wo, 300 + g.wo);
        auto w = random_vec(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, 400 + g.kw);
        std::vector<double> fast(static_cast<std::size_t>(g.ci) * g.hi * g.wi, -1.0);
        std::vector<double> ref(fast.size(), -2.0);
        std::vector<double> scratch;
        lp::kern::conv2d_input_grad(g, gy.data(), w.data(), fast.data(), scratch);
        lp::refkern::conv2d_input_grad(g, gy.data(), w.data(), ref.data());
        CHECK(max_abs_diff(fast, ref) < 1e-10);
    }
}

TEST_CASE("conv2d_filter_grad matches the reference implementation") {
    for (const ConvGeom& g : conv_cases()) {
        auto x = random_vec(static_cast<std::size_t>(g.ci) * g.hi * g.wi, 500 + g.hi);
        auto gy = random_vec(static_cast<std::size_t>(g.co) * g.ho * g.wo, 600 + g.ho);
        std::vector<double> fast(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, -1.0);
        std::vector<double> ref(fast.size(), -2.0);
        std::vector<double> scratch;
        lp::kern::conv2d_filter_grad(g, x.data(), gy.data(), fast.data(), scratch);
        lp::refkern::conv2d_filter_grad(g, x.data(), gy.data(), ref.data());
        CHECK(max_abs_diff(fast, ref) < 1e-10);
    }
}

TEST_CASE("maxpool and its input gradient match the reference exactly") {
    PoolGeom g;
    g.c = 7;
    g.hi = 15;
    g.wi = 12;
    g.kh = 3;
    g.kw = 3;
    g.sh = 3;
    g.sw = 3;
    g.ho = 5;
    g.wo = 4;
    auto x = random_vec(static_cast<std::size_t>(g.c) * g.hi * g.wi, 700);
    auto gy = random_vec(static_cast<std::size_t>(g.c) * g.ho * g.wo, 701);
    std::vector<double> y_fast(gy.size()), y_ref(gy.size());
    lp::kern::maxpool(g, x.data(), y_fast.data());
    lp::refkern::maxpool(g, x.data(), y_ref.data());
    CHECK(std::memcmp(y_fast.data(), y_ref.data(), y_fast.size() * sizeof(double)) == 0);

    std::vector<double> xg_fast(x.size()), xg_ref(x.size());
    lp::kern::maxpool_input_grad(g, x.data(), gy.data(), xg_fast.data());
    lp::refkern::maxpool_input_grad(g, x.data(), gy.data(), xg_ref.data());
    CHECK(std::memcmp(xg_fast.data(), xg_ref.data(), xg_fast.size() * sizeof(double)) == 0);
}

TEST_CASE("maxpool ties resolve to the first element in row-major order") {
    PoolGeom g;
    g.c = 1;
    g.hi = 2;
    g.wi = 2;
    g.kh = 2;
    g.kw = 2;
    g.sh = 2;
    g.sw = 2;
    g.ho = 1;
    g.wo = 1;
    std::vector<double> x = {3.0, 3.0, 3.0, 3.0};
    std::vector<double> gy = {5.0};
    std::vector<double> xg(4, 0.0);
    lp::kern::maxpool_input_grad(g, x.data(), gy.data(), xg.data());
    CHECK(xg[0] == 5.0);
    CHECK(xg[1] == 0.0);
    CHECK(xg[2] == 0.0);
    CHECK(xg[3] == 0.0);
}

TEST_CASE("dense kernels match the reference implementation") {
    const int M = 37, K = 53;
    auto W = random_vec(static_cast<std::size_t>(M) * K, 800);
    auto x = random_vec(static_cast<std::size_t>(K), 801);
    auto v = random_vec(static_cast<std::size_t>(M), 802);

    std::vector<double> y_fast(M), y_ref(M);
    lp::kern::dense(W.data(), x.data(), y_fast.data(), M, K);
    lp::refkern::dense(W.data(), x.data(), y_ref.data(), M, K);
    CHECK(max_abs_diff(y_fast, y_ref) < 1e-12);

    std::vector<double> t_fast(K), t_ref(K);
    lp::kern::dense_t(W.data(), v.data(), t_fast.data(), M, K);
    lp::refkern::dense_t(W.data(), v.data(), t_ref.data(), M, K);
    CHECK(max_abs_diff(t_fast, t_ref) < 1e-12);
}

TEST_CASE("outer product fills the full matrix") {
    const int M = 5, K = 4;
    auto a = random_vec(M, 810);
    auto b = random_vec(K, 811);
    std::vector<double> Y(static_cast<std::size_t>(M) * K, -1.0);
    lp::kern::outer(a.data(), b.data(), Y.data(), M, K);
    for (int i = 0; i < M; ++i) {
        for (int k = 0; k < K; ++k) {
            CHECK(Y[static_cast<std::size_t>(i) * K + k] == doctest::Approx(a[i] * b[k]).epsilon(1e-14));
        }
    }
}

TEST_CASE("gemm family matches the reference implementation") {
    const int M = 21, K = 34, N = 45;
    auto A = random_vec(static_cast<std::size_t>(M) * K, 900);
    auto B = random_vec(static_cast<std::size_t>(K) * N, 901);

    std::vector<double> C_fast(static_cast<std::size_t>(M) * N, 0.0);
    std::vector<double> C_ref(C_fast.size(), 0.0);
    lp::kern::gemm(A.data(), B.data(), C_fast.data(), M, K, N);
    lp::refkern::gemm(A.data(), B.data(), C_ref.data(), M, K, N);
    CHECK(max_abs_diff(C_fast, C_ref) < 1e-11);

    SUBCASE("accumulate flag adds on top of existing output") {
        std::vector<double> C_acc = C_ref;
        lp::kern::gemm(A.data(), B.data(), C_acc.data(), M, K, N, true);
        for (std::size_t i = 0; i < C_acc.size(); ++i) {
            CHECK(C_acc[i] == doctest::Approx(2.0 * C_ref[i]).epsilon(1e-12));
        }
    }

    SUBCASE("gemm_abt") {
        auto Bt = random_vec(static_cast<std::size_t>(N) * K, 902);
        std::vector<double> C1(static_cast<std::size_t>(M) * N, 0.0);
        lp::kern::gemm_abt(A.data(), Bt.data(), C1.data(), M, N, K);
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < N; ++j) {
                double s = 0.0;
                for (int k = 0; k < K; ++k) {
                    s += A[static_cast<std::size_t>(i) * K + k] * Bt[static_cast<std::size_t>(j) * K + k];
                }
                CHECK(C1[static_cast<std::size_t>(i) * N + j] == doctest::Approx(s).epsilon(1e-11));
            }
        }
    }

    SUBCASE("gemm_atb") {
        auto A2 = random_vec(static_cast<std::size_t>(M) * K, 903);
        auto B2 = random_vec(static_cast<std::size_t>(M) * N, 904);
        std::vector<double> C2(static_cast<std::size_t>(K) * N, 0.0);
        lp::kern::gemm_atb(A2.data(), B2.data(), C2.data(), M, K, N);
        for (int k = 0; k < K; ++k) {
            for (int j = 0; j < N; ++j) {
                double s = 0.0;
                for (int m = 0; m < M; ++m) {
                    s += A2[static_cast<std::size_t>(m) * K + k] * B2[static_cast<std::size_t>(m) * N + j];
                }
                CHECK(C2[static_cast<std::size_t>(k) * N + j] == doctest::Approx(s).epsilon(1e-11));
            }
        }
    }
}

TEST_CASE("kernel output is bit-identical across thread counts") {
    ConvGeom g = make_geom(3, 64, 48, 16, 5, 5, 2, 2, 2, 2);
    auto x = random_vec(static_cast<std::size_t>(g.ci) * g.hi * g.wi, 950);
    auto w = random_vec(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw, 951);
    auto gy = random_vec(static_cast<std::size_t>(g.co) * g.ho * g.wo, 952);

    const int old_threads = omp_get_max_threads();
    std::vector<std::vector<double>> conv_runs, igrad_runs, fgrad_runs;
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        std::vector<double> scratch;
        std::vector<double> y(static_cast<std::size_t>(g.co) * g.ho * g.wo);
        lp::kern::conv2d(g, x.data(), w.data(), y.data(), scratch);
        conv_runs.push_back(std::move(y));

        std::vector<double> xg(static_cast<std::size_t>(g.ci) * g.hi * g.wi);
        lp::kern::conv2d_input_grad(g, gy.data(), w.data(), xg.data(), scratch);
        igrad_runs.push_back(std::move(xg));

        std::vector<double> wg(static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw);
        lp::kern::conv2d_filter_grad(g, x.data(), gy.data(), wg.data(), scratch);
        fgrad_runs.push_back(std::move(wg));
    }
    omp_set_num_threads(old_threads);

    for (std::size_t i = 1; i < conv_runs.size(); ++i) {
        CHECK(std::memcmp(conv_runs[0].data(), conv_runs[i].data(), conv_runs[0].size() * sizeof(double)) == 0);
        CHECK(std::memcmp(igrad_runs[0].data(), igrad_runs[i].data(), igrad_runs[0].size() * sizeof(double)) == 0);
        CHECK(std::memcmp(fgrad_runs[0].data(), fgrad_runs[i].data(), fgrad_runs[0].size() * sizeof(double)) == 0);
    }
}
