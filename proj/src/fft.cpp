#include "lp/fft.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace lp {

void fft_complex(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    if (im.size() != n) throw std::invalid_argument("fft: re/im length mismatch");
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two, got " + std::to_string(n));
    if (n == 1) return;

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }

    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -two_pi / double(len);
        double wr = std::cos(ang);
        double wi = std::sin(ang);
        for (std::size_t start = 0; start < n; start += len) {
            double cr = 1.0;
            double ci = 0.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::size_t a = start + k;
                std::size_t b = a + len / 2;
                double tr = re[b] * cr - im[b] * ci;
                double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

}  // namespace lp
