#pragma once

#include <string>

#include "lp/frontend.hpp"

namespace lp {

// 8-bit binary PGM, min-max normalised to [0,255]. Time runs left to right,
// frequency bands ascend upward, a constant image maps to mid-grey 128.
void write_pgm(const std::string& path, const MelSpectrogram& spec);

// Reads an MSPC spectrogram and renders it next to no other processing.
void render_spectrogram(const std::string& mspc_path, const std::string& pgm_path);

}  // namespace lp
