#include "lp/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <cstring>

namespace lp::kern {

namespace {

constexpr int kRowBlock = 4;
constexpr int kColBlock = 64;

inline bool want_parallel(std::int64_t work) { return work > (1 << 16) && !omp_in_parallel(); }

}  // namespace

void gemm(const double* A, const double* B, double* C, int M, int K, int N, bool acc) {
    const int nib = (M + kRowBlock - 1) / kRowBlock;
    const int njb = (N + kColBlock - 1) / kColBlock;
    const std::int64_t work = 2ll * M * K * N;
#pragma omp parallel for collapse(2) schedule(static) if (want_parallel(work))
    for (int ib = 0; ib < nib; ++ib) {
        for (int jb = 0; jb < njb; ++jb) {
            const int i0 = ib * kRowBlock, i1 = std::min(M, i0 + kRowBlock);
            const int j0 = jb * kColBlock, jn = std::min(N, j0 + kColBlock) - j0;
            double accum[kRowBlock][kColBlock];
            for (int i = 0; i < i1 - i0; ++i)
                for (int j = 0; j < jn; ++j) accum[i][j] = 0.0;
            for (int k = 0; k < K; ++k) {
                const double* brow = B + static_cast<std::int64_t>(k) * N + j0;
                for (int i = i0; i < i1; ++i) {
                    const double a = A[static_cast<std::int64_t>(i) * K + k];
                    double* arow = accum[i - i0];
#pragma omp simd
                    for (int j = 0; j < jn; ++j) arow[j] += a * brow[j];
                }
            }
            for (int i = i0; i < i1; ++i) {
                double* crow = C + static_cast<std::int64_t>(i) * N + j0;
                const double* arow = accum[i - i0];
                if (acc) {
                    for (int j = 0; j < jn; ++j) crow[j] += arow[j];
                } else {
                    for (int j = 0; j < jn; ++j) crow[j] = arow[j];
                }
            }
        }
    }
}

void gemm_abt(const double* A, const double* B, double* C, int M, int N, int K, bool acc) {
    const int nib = (M + kRowBlock - 1) / kRowBlock;
    const std::int64_t work = 2ll * M * N * K;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int ib = 0; ib < nib; ++ib) {
        const int i0 = ib * kRowBlock, i1 = std::min(M, i0 + kRowBlock);
        for (int j = 0; j < N; ++j) {
            const double* b = B + static_cast<std::int64_t>(j) * K;
            for (int i = i0; i < i1; ++i) {
                const double* a = A + static_cast<std::int64_t>(i) * K;
                double s = 0.0;
#pragma omp simd reduction(+ : s)
                for (int k = 0; k < K; ++k) s += a[k] * b[k];
                double* c = C + static_cast<std::int64_t>(i) * N + j;
                *c = acc ? *c + s : s;
            }
        }
    }
}

void gemm_atb(const double* A, const double* B, double* C, int M, int K, int N, bool acc) {
    const std::int64_t work = 2ll * M * K * N;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int k = 0; k < K; ++k) {
        double* crow = C + static_cast<std::int64_t>(k) * N;
        if (!acc) std::memset(crow, 0, sizeof(double) * static_cast<std::size_t>(N));
        for (int m = 0; m < M; ++m) {
            const double a = A[static_cast<std::int64_t>(m) * K + k];
            const double* brow = B + static_cast<std::int64_t>(m) * N;
#pragma omp simd
            for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

void im2col(const ConvGeom& g, const double* x, double* B) {
    const std::int64_t N = static_cast<std::int64_t>(g.ho) * g.wo;
    const std::int64_t work = static_cast<std::int64_t>(g.ci) * g.kh * g.kw * N;
#pragma omp parallel for collapse(2) schedule(static) if (want_parallel(work))
    for (int ci = 0; ci < g.ci; ++ci) {
        for (int dh = 0; dh < g.kh; ++dh) {
            for (int dw = 0; dw < g.kw; ++dw) {
                const int r = (ci * g.kh + dh) * g.kw + dw;
                double* brow = B + r * N;
                const double* xc = x + static_cast<std::int64_t>(ci) * g.hi * g.wi;
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh * g.sh + dh - g.ph;
                    double* seg = brow + static_cast<std::int64_t>(oh) * g.wo;
                    if (ih < 0 || ih >= g.hi) {
                        std::memset(seg, 0, sizeof(double) * static_cast<std::size_t>(g.wo));
                        continue;
                    }
                    const double* xrow = xc + static_cast<std::int64_t>(ih) * g.wi;
                    for (int ow = 0; ow < g.wo; ++ow) {
                        const int iw = ow * g.sw + dw - g.pw;
                        seg[ow] = (iw >= 0 && iw < g.wi) ? xrow[iw] : 0.0;
                    }
                }
            }
        }
    }
}

void conv2d(const ConvGeom& g, const double* x, const double* w, double* y, std::vector<double>& scratch) {
    const int K = g.ci * g.kh * g.kw;
    const std::int64_t N = static_cast<std::int64_t>(g.ho) * g.wo;
    scratch.resize(static_cast<std::size_t>(K) * N);
    im2col(g, x, scratch.data());
    gemm(w, scratch.data(), y, g.co, K, static_cast<int>(N));
}

void conv2d_input_grad(const ConvGeom& g, const double* gy, const double* w, double* xg,
                       std::vector<double>& scratch) {
    const int K = g.ci * g.kh * g.kw;
    const std::int64_t N = static_cast<std::int64_t>(g.ho) * g.wo;
    scratch.resize(static_cast<std::size_t>(K) * N);
    gemm_atb(w, gy, scratch.data(), g.co, K, static_cast<int>(N));
    const std::int64_t plane = static_cast<std::int64_t>(g.hi) * g.wi;
    const std::int64_t work = static_cast<std::int64_t>(K) * N;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int ci = 0; ci < g.ci; ++ci) {
        double* xc = xg + ci * plane;
        std::memset(xc, 0, sizeof(double) * static_cast<std::size_t>(plane));
        for (int dh = 0; dh < g.kh; ++dh) {
            for (int dw = 0; dw < g.kw; ++dw) {
                const int r = (ci * g.kh + dh) * g.kw + dw;
                const double* drow = scratch.data() + r * N;
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh * g.sh + dh - g.ph;
                    if (ih < 0 || ih >= g.hi) continue;
                    double* xrow = xc + static_cast<std::int64_t>(ih) * g.wi;
                    const double* seg = drow + static_cast<std::int64_t>(oh) * g.wo;
                    for (int ow = 0; ow < g.wo; ++ow) {
                        const int iw = ow * g.sw + dw - g.pw;
                        if (iw >= 0 && iw < g.wi) xrow[iw] += seg[ow];
                    }
                }
            }
        }
    }
}

void conv2d_filter_grad(const ConvGeom& g, const double* x, const double* gy, double* wg,
                        std::vector<double>& scratch) {
    const int K = g.ci * g.kh * g.kw;
    const std::int64_t N = static_cast<std::int64_t>(g.ho) * g.wo;
    scratch.resize(static_cast<std::size_t>(K) * N);
    im2col(g, x, scratch.data());
    gemm_abt(gy, scratch.data(), wg, g.co, K, static_cast<int>(N));
}

void maxpool(const PoolGeom& g, const double* x, double* y) {
    const std::int64_t work = static_cast<std::int64_t>(g.c) * g.ho * g.wo * g.kh * g.kw;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int c = 0; c < g.c; ++c) {
        const double* xc = x + static_cast<std::int64_t>(c) * g.hi * g.wi;
        double* yc = y + static_cast<std::int64_t>(c) * g.ho * g.wo;
        for (int oh = 0; oh < g.ho; ++oh) {
            for (int ow = 0; ow < g.wo; ++ow) {
                const int h0 = oh * g.sh, w0 = ow * g.sw;
                double best = xc[static_cast<std::int64_t>(h0) * g.wi + w0];
                for (int dh = 0; dh < g.kh; ++dh) {
                    const double* row = xc + static_cast<std::int64_t>(h0 + dh) * g.wi + w0;
                    for (int dw = 0; dw < g.kw; ++dw) {
                        if (row[dw] > best) best = row[dw];
                    }
                }
                yc[static_cast<std::int64_t>(oh) * g.wo + ow] = best;
            }
        }
    }
}

void maxpool_input_grad(const PoolGeom& g, const double* x, const double* gy, double* xg) {
    std::memset(xg, 0, sizeof(double) * static_cast<std::size_t>(g.c) * g.hi * g.wi);
    const std::int64_t work = static_cast<std::int64_t>(g.c) * g.ho * g.wo * g.kh * g.kw;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int c = 0; c < g.c; ++c) {
        const double* xc = x + static_cast<std::int64_t>(c) * g.hi * g.wi;
        const double* gc = gy + static_cast<std::int64_t>(c) * g.ho * g.wo;
        double* oc = xg + static_cast<std::int64_t>(c) * g.hi * g.wi;
        for (int oh = 0; oh < g.ho; ++oh) {
            for (int ow = 0; ow < g.wo; ++ow) {
                const int h0 = oh * g.sh, w0 = ow * g.sw;
                int bh = h0, bw = w0;
                double best = xc[static_cast<std::int64_t>(h0) * g.wi + w0];
                for (int dh = 0; dh < g.kh; ++dh) {
                    for (int dw = 0; dw < g.kw; ++dw) {
                        const double v = xc[static_cast<std::int64_t>(h0 + dh) * g.wi + (w0 + dw)];
                        if (v > best) {
                            best = v;
                            bh = h0 + dh;
                            bw = w0 + dw;
                        }
                    }
                }
                oc[static_cast<std::int64_t>(bh) * g.wi + bw] += gc[static_cast<std::int64_t>(oh) * g.wo + ow];
            }
        }
    }
}

void dense(const double* W, const double* x, double* y, int M, int K) {
    const std::int64_t work = 2ll * M * K;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int i = 0; i < M; ++i) {
        const double* row = W + static_cast<std::int64_t>(i) * K;
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int k = 0; k < K; ++k) s += row[k] * x[k];
        y[i] = s;
    }
}

void dense_t(const double* W, const double* v, double* y, int M, int K) {
    std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(K));
    for (int m = 0; m < M; ++m) {
        const double a = v[m];
        const double* row = W + static_cast<std::int64_t>(m) * K;
#pragma omp simd
        for (int k = 0; k < K; ++k) y[k] += a * row[k];
    }
}

void outer(const double* a, const double* b, double* Y, int M, int K) {
    const std::int64_t work = static_cast<std::int64_t>(M) * K;
#pragma omp parallel for schedule(static) if (want_parallel(work))
    for (int i = 0; i < M; ++i) {
        double* row = Y + static_cast<std::int64_t>(i) * K;
        const double ai = a[i];
#pragma omp simd
        for (int k = 0; k < K; ++k) row[k] = ai * b[k];
    }
}

}  // namespace lp::kern
