#include "lp/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "lp/mspc.hpp"

namespace lp {

void write_pgm(const std::string& path, const MelSpectrogram& spec) {
    if (spec.frames < 1 || spec.bands < 1)
        throw std::invalid_argument("render: empty spectrogram");

    double lo = spec.values[0], hi = spec.values[0];
    for (double v : spec.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    std::vector<unsigned char> pixels(spec.values.size());
    std::size_t p = 0;
    for (int b = spec.bands - 1; b >= 0; --b) {
        for (int t = 0; t < spec.frames; ++t) {
            double v = spec.at(t, b);
            long g = hi > lo ? std::lround((v - lo) / (hi - lo) * 255.0) : 128;
            pixels[p++] = static_cast<unsigned char>(std::clamp(g, 0l, 255l));
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("render: cannot open " + path + " for writing");
    out << "P5\n" << spec.frames << ' ' << spec.bands << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw std::runtime_error("render: short write to " + path);
}

void render_spectrogram(const std::string& mspc_path, const std::string& pgm_path) {
    write_pgm(pgm_path, read_mspc(mspc_path));
}

}  // namespace lp
