#pragma once

#include <vector>

namespace lp {

/// In-place radix-2 decimation-in-time FFT. Both vectors must have the same
/// power-of-two length.
void fft_complex(std::vector<double>& re, std::vector<double>& im);

}  // namespace lp
