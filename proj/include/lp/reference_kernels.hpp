#pragma once

#include "lp/kernels.hpp"

/// Straight-loop serial implementations of the hot kernels, written directly
/// from the operator definitions. Tests check the OpenMP kernels against
/// these; the benchmark target compares their throughput.
namespace lp::refkern {

using kern::ConvGeom;
using kern::PoolGeom;

void gemm(const double* A, const double* B, double* C, int M, int K, int N);
void conv2d(const ConvGeom& g, const double* x, const double* w, double* y);
void conv2d_input_grad(const ConvGeom& g, const double* gy, const double* w, double* xg);
void conv2d_filter_grad(const ConvGeom& g, const double* x, const double* gy, double* wg);
void maxpool(const PoolGeom& g, const double* x, double* y);
void maxpool_input_grad(const PoolGeom& g, const double* x, const double* gy, double* xg);
void dense(const double* W, const double* x, double* y, int M, int K);
void dense_t(const double* W, const double* v, double* y, int M, int K);

}  // namespace lp::refkern
