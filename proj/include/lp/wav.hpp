#pragma once

#include <string>

#include "lp/frontend.hpp"

namespace lp {

/// Reads a RIFF/WAVE file. Only PCM16, mono, 22050 Hz is accepted; anything
/// else is rejected with a diagnostic naming the offending property. Samples
/// are scaled by 1/32768.
Waveform ingest_wav(const std::string& path);

/// Writes a waveform as PCM16 mono; values are clipped to [-1, 1).
void write_wav_pcm16(const std::string& path, const Waveform& w);

}  // namespace lp
