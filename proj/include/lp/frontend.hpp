#pragma once

#include <vector>

#include "lp/tensor.hpp"

namespace lp {

constexpr int kSampleRate = 22050;
constexpr int kWindowSize = 1024;
constexpr int kHopSize = 315;
constexpr int kSpectrumBins = 513;
constexpr int kMelBands = 80;
constexpr double kMelMinHz = 27.5;
constexpr double kMelMaxHz = 8000.0;
constexpr double kLogFloor = 1e-7;

struct Waveform {
    std::vector<double> samples;
    int sample_rate = kSampleRate;
};

/// Log-mel spectrogram, time major: values[t * bands + b].
struct MelSpectrogram {
    int frames = 0;
    int bands = 0;
    std::vector<double> values;

    double& at(int t, int b) { return values[std::size_t(t) * bands + b]; }
    double at(int t, int b) const { return values[std::size_t(t) * bands + b]; }
};

/// Number of frames the analysis produces for a given sample count, or 0 when
/// the signal is shorter than one window.
int frame_count(std::size_t samples);

/// Magnitude spectrogram, shape [frames, 513].
Tensor stft_magnitude(const Waveform& w);

/// Triangular mel filterbank, shape [80, 513]. Rows have unit peak.
const Tensor& mel_filterbank();

/// Continuous response of one triangle at an arbitrary frequency.
double mel_filter_response(int band, double freq_hz);

/// Centre frequency of one triangle in Hz.
double mel_band_center_hz(int band);

/// Elementwise ln(max(x, 1e-7)). Negative input is a domain error.
MelSpectrogram log_compress(const Tensor& mel_energies);

/// Full pipeline: STFT magnitudes, mel projection, log compression.
MelSpectrogram waveform_to_mel(const Waveform& w);

/// Fixed-length excerpts starting at 0, stride, 2*stride, ...
std::vector<MelSpectrogram> clip_frames(const MelSpectrogram& spec, int clip_len, int stride);

/// Contiguous sub-range of frames [start, start + len).
MelSpectrogram crop_mel(const MelSpectrogram& spec, int start, int len);

/// Classifier input layout [1, frames, bands].
Tensor mel_to_tensor(const MelSpectrogram& m);
MelSpectrogram mel_from_tensor(const Tensor& t);

}  // namespace lp
