#pragma once

#include <string>

#include "lp/frontend.hpp"

namespace lp {

/// Binary spectrogram container: magic "MSPC", u16 version, u32 frames,
/// u32 bands, then frames*bands float32 values in time-major order. All
/// integers and floats are little endian.
void write_mspc(const std::string& path, const MelSpectrogram& spec);
MelSpectrogram read_mspc(const std::string& path);

}  // namespace lp
