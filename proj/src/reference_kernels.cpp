#include "lp/reference_kernels.hpp"

#include <cstdint>
#include <cstring>

namespace lp::refkern {

namespace {
inline double at(const double* x, const ConvGeom& g, int ci, int ih, int iw) {
    if (ih < 0 || ih >= g.hi || iw < 0 || iw >= g.wi) return 0.0;
    return x[(static_cast<std::int64_t>(ci) * g.hi + ih) * g.wi + iw];
}
}  // namespace

void gemm(const double* A, const double* B, double* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) {
                s += A[static_cast<std::int64_t>(i) * K + k] * B[static_cast<std::int64_t>(k) * N + j];
            }
            C[static_cast<std::int64_t>(i) * N + j] = s;
        }
    }
}

void conv2d(const ConvGeom& g, const double* x, const double* w, double* y) {
    for (int co = 0; co < g.co; ++co) {
        for (int oh = 0; oh < g.ho; ++oh) {
            for (int ow = 0; ow < g.wo; ++ow) {
                double s = 0.0;
                for (int ci = 0; ci < g.ci; ++ci) {
                    for (int dh = 0; dh < g.kh; ++dh) {
                        for (int dw = 0; dw < g.kw; ++dw) {
                            const double wv =
                                w[((static_cast<std::int64_t>(co) * g.ci + ci) * g.kh + dh) * g.kw + dw];
                            s += wv * at(x, g, ci, oh * g.sh + dh - g.ph, ow * g.sw + dw - g.pw);
                        }
                    }
                }
                y[(static_cast<std::int64_t>(co) * g.ho + oh) * g.wo + ow] = s;
            }
        }
    }
}

void conv2d_input_grad(const ConvGeom& g, const double* gy, const double* w, double* xg) {
    std::memset(xg, 0, sizeof(double) * static_cast<std::size_t>(g.ci) * g.hi * g.wi);
    for (int co = 0; co < g.co; ++co) {
        for (int oh = 0; oh < g.ho; ++oh) {
            for (int ow = 0; ow < g.wo; ++ow) {
                const double gv = gy[(static_cast<std::int64_t>(co) * g.ho + oh) * g.wo + ow];
                for (int ci = 0; ci < g.ci; ++ci) {
                    for (int dh = 0; dh < g.kh; ++dh) {
                        for (int dw = 0; dw < g.kw; ++dw) {
                            const int ih = oh * g.sh + dh - g.ph;
                            const int iw = ow * g.sw + dw - g.pw;
                            if (ih < 0 || ih >= g.hi || iw < 0 || iw >= g.wi) continue;
                            const double wv =
                                w[((static_cast<std::int64_t>(co) * g.ci + ci) * g.kh + dh) * g.kw + dw];
                            xg[(static_cast<std::int64_t>(ci) * g.hi + ih) * g.wi + iw] += gv * wv;
                        }
                    }
                }
            }
        }
    }
}

void conv2d_filter_grad(const ConvGeom& g, const double* x, const double* gy, double* wg) {
    std::memset(wg, 0, sizeof(double) * static_cast<std::size_t>(g.co) * g.ci * g.kh * g.kw);
    for (int co = 0; co < g.co; ++co) {
        for (int ci = 0; ci < g.ci; ++ci) {
            for (int dh = 0; dh < g.kh; ++dh) {
                for (int dw = 0; dw < g.kw; ++dw) {
                    double s = 0.0;
                    for (int oh = 0; oh < g.ho; ++oh) {
                        for (int ow = 0; ow < g.wo; ++ow) {
                            s += gy[(static_cast<std::int64_t>(co) * g.ho + oh) * g.wo + ow] *
                                 at(x, g, ci, oh * g.sh + dh - g.ph, ow * g.sw + dw - g.pw);
                        }
                    }
                    wg[((static_cast<std::int64_t>(co) * g.ci + ci) * g.kh + dh) * g.kw + dw] = s;
                }
            }
        }
    }
}

void maxpool(const PoolGeom& g, const double* x, double* y) {
    for (int c = 0; c < g.c; ++c) {
        for (int oh = 0; oh < g.ho; ++oh) {
            for (int ow = 0; ow < g.wo; ++ow) {
                double best = x[(static_cast<std::int64_t>(c) * g.hi + oh * g.sh) * g.wi + ow * g.sw];
                for (int dh = 0; dh < g.kh; ++dh) {
                    for (int dw = 0; dw < g.kw; ++dw) {
                        const double v =
                            x[(static_cast<std::int64_t>(c) * g.hi + oh * g.sh + dh) * g.wi + ow * g.sw + dw];
                        if (v > best) best = v;
                    }
                }
                y[(static_cast<std::int64_t>(c) * g.ho + oh) * g.wo + ow] = best;
            }
        }
    }
}

void maxpool_input_grad(const PoolGeom& g, const double* x, const double* gy, double* xg) {
    std::memset(xg, 0, sizeof(double) * static_cast<std::size_t>(g.c) * g.hi * g.wi);
    for (int c = 0; c < g.c; ++c) {
        for (int oh = 0; oh < g.ho; ++oh) {
            for (int ow = 0; ow < g.wo; ++ow) {
                int bh = oh * g.sh, bw = ow * g.sw;
                double best = x[(static_cast<std::int64_t>(c) * g.hi + bh) * g.wi + bw];
                for (int dh = 0; dh < g.kh; ++dh) {
                    for (int dw = 0; dw < g.kw; ++dw) {
                        const double v =
                            x[(static_cast<std::int64_t>(c) * g.hi + oh * g.sh + dh) * g.wi + ow * g.sw + dw];
                        if (v > best) {
                            best = v;
                            bh = oh * g.sh + dh;
                            bw = ow * g.sw + dw;
                        }
                    }
                }
                xg[(static_cast<std::int64_t>(c) * g.hi + bh) * g.wi + bw] +=
                    gy[(static_cast<std::int64_t>(c) * g.ho + oh) * g.wo + ow];
            }
        }
    }
}

void dense(const double* W, const double* x, double* y, int M, int K) {
    for (int i = 0; i < M; ++i) {
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += W[static_cast<std::int64_t>(i) * K + k] * x[k];
        y[i] = s;
    }
}

void dense_t(const double* W, const double* v, double* y, int M, int K) {
    for (int k = 0; k < K; ++k) {
        double s = 0.0;
        for (int m = 0; m < M; ++m) s += W[static_cast<std::int64_t>(m) * K + k] * v[m];
        y[k] = s;
    }
}

}  // namespace lp::refkern
