#pragma once

#include <vector>

namespace lp::kern {

/// Geometry of one 2-D convolution. Tensors are channels-first:
/// x[ci][hi][wi], filters w[co][ci][kh][kw], output y[co][ho][wo].
/// ph/pw are the leading (top/left) zero-pad counts; trailing pad is implied
/// by the output extents.
struct ConvGeom {
    int ci = 0, hi = 0, wi = 0;
    int co = 0, kh = 0, kw = 0;
    int sh = 1, sw = 1;
    int ph = 0, pw = 0;
    int ho = 0, wo = 0;
};

struct PoolGeom {
    int c = 0, hi = 0, wi = 0;
    int kh = 0, kw = 0, sh = 1, sw = 1;
    int ho = 0, wo = 0;
};

/// C[M x N] = A[M x K] * B[K x N], row-major. Accumulates when acc is true.
void gemm(const double* A, const double* B, double* C, int M, int K, int N, bool acc = false);
/// C[M x N] = A[M x K] * B[N x K]^T (rows of B are dotted with rows of A).
void gemm_abt(const double* A, const double* B, double* C, int M, int N, int K, bool acc = false);
/// C[K x N] = A[M x K]^T * B[M x N].
void gemm_atb(const double* A, const double* B, double* C, int M, int K, int N, bool acc = false);

/// y = conv2d(x, w) under geom. scratch holds the im2col panel.
void conv2d(const ConvGeom& g, const double* x, const double* w, double* y, std::vector<double>& scratch);
/// xg = adjoint of conv2d applied to the output cotangent gy; this is also
/// the forward kernel for transposed convolution.
void conv2d_input_grad(const ConvGeom& g, const double* gy, const double* w, double* xg,
                       std::vector<double>& scratch);
/// wg[co][ci][kh][kw] = filter cotangent given input x and output cotangent gy.
void conv2d_filter_grad(const ConvGeom& g, const double* x, const double* gy, double* wg,
                        std::vector<double>& scratch);

void maxpool(const PoolGeom& g, const double* x, double* y);
/// Routes gy to the first (row-major scan) max position of each window.
void maxpool_input_grad(const PoolGeom& g, const double* x, const double* gy, double* xg);

/// y[M] = W[M x K] * x[K]
void dense(const double* W, const double* x, double* y, int M, int K);
/// y[K] = W[M x K]^T * v[M]
void dense_t(const double* W, const double* v, double* y, int M, int K);
/// Y[M x K] = a[M] * b[K]^T
void outer(const double* a, const double* b, double* Y, int M, int K);

/// Expands x into the im2col panel B[(ci*kh*kw) x (ho*wo)].
void im2col(const ConvGeom& g, const double* x, double* B);

}  // namespace lp::kern
