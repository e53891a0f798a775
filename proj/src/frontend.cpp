#include "lp/frontend.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lp/fft.hpp"

namespace lp {
namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// 82 edge frequencies, equally spaced on the mel scale. Band b spans
/// edges[b] .. edges[b+2] with its peak at edges[b+1].
const std::vector<double>& band_edges_hz() {
    static const std::vector<double> edges = [] {
        std::vector<double> e(kMelBands + 2);
        double lo = hz_to_mel(kMelMinHz);
        double hi = hz_to_mel(kMelMaxHz);
        for (int i = 0; i < kMelBands + 2; ++i)
            e[i] = mel_to_hz(lo + (hi - lo) * double(i) / double(kMelBands + 1));
        return e;
    }();
    return edges;
}

}  // namespace

int frame_count(std::size_t samples) {
    if (samples < std::size_t(kWindowSize)) return 0;
    return int((samples - kWindowSize) / kHopSize) + 1;
}

Tensor stft_magnitude(const Waveform& w) {
    if (w.sample_rate != kSampleRate)
        throw std::invalid_argument("frontend: stft expects " + std::to_string(kSampleRate) +
                                    " Hz input, got " + std::to_string(w.sample_rate));
    int frames = frame_count(w.samples.size());
    if (frames < 1)
        throw std::invalid_argument("frontend: stft needs at least " + std::to_string(kWindowSize) +
                                    " samples, got " + std::to_string(w.samples.size()));

    static const std::vector<double> window = [] {
        std::vector<double> win(kWindowSize);
        for (int i = 0; i < kWindowSize; ++i)
            win[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * double(i) / double(kWindowSize));
        return win;
    }();

    Tensor out = Tensor::zeros({frames, kSpectrumBins});
    std::vector<double> re(kWindowSize), im(kWindowSize);
    for (int t = 0; t < frames; ++t) {
        const double* src = w.samples.data() + std::size_t(t) * kHopSize;
        for (int i = 0; i < kWindowSize; ++i) {
            re[i] = src[i] * window[i];
            im[i] = 0.0;
        }
        fft_complex(re, im);
        double* row = out.data.data() + std::size_t(t) * kSpectrumBins;
        for (int k = 0; k < kSpectrumBins; ++k) row[k] = std::sqrt(re[k] * re[k] + im[k] * im[k]);
    }
    return out;
}

double mel_filter_response(int band, double freq_hz) {
    if (band < 0 || band >= kMelBands)
        throw std::invalid_argument("frontend: mel band out of range: " + std::to_string(band));
    const auto& e = band_edges_hz();
    double l = e[band], c = e[band + 1], r = e[band + 2];
    if (freq_hz <= l || freq_hz >= r) return 0.0;
    if (freq_hz <= c) return (freq_hz - l) / (c - l);
    return (r - freq_hz) / (r - c);
}

double mel_band_center_hz(int band) {
    if (band < 0 || band >= kMelBands)
        throw std::invalid_argument("frontend: mel band out of range: " + std::to_string(band));
    return band_edges_hz()[band + 1];
}

const Tensor& mel_filterbank() {
    static const Tensor bank = [] {
        Tensor m = Tensor::zeros({kMelBands, kSpectrumBins});
        for (int b = 0; b < kMelBands; ++b)
            for (int k = 0; k < kSpectrumBins; ++k)
                m.data[std::size_t(b) * kSpectrumBins + k] =
                    mel_filter_response(b, double(k) * kSampleRate / kWindowSize);
        return m;
    }();
    return bank;
}

MelSpectrogram log_compress(const Tensor& mel_energies) {
    if (mel_energies.rank() != 2 || mel_energies.dims[1] != kMelBands)
        throw std::invalid_argument("frontend: log_compress expects [frames," +
                                    std::to_string(kMelBands) + "], got " + shape_str(mel_energies.dims));
    MelSpectrogram out;
    out.frames = mel_energies.dims[0];
    out.bands = kMelBands;
    out.values.resize(mel_energies.data.size());
    for (std::size_t i = 0; i < mel_energies.data.size(); ++i) {
        double v = mel_energies.data[i];
        if (v < 0.0)
            throw std::domain_error("frontend: log_compress input is negative at element " +
                                    std::to_string(i));
        out.values[i] = std::log(v < kLogFloor ? kLogFloor : v);
    }
    return out;
}

MelSpectrogram waveform_to_mel(const Waveform& w) {
    Tensor mag = stft_magnitude(w);
    const Tensor& bank = mel_filterbank();
    int frames = mag.dims[0];
    Tensor mel = Tensor::zeros({frames, kMelBands});
    for (int t = 0; t < frames; ++t) {
        const double* row = mag.data.data() + std::size_t(t) * kSpectrumBins;
        double* dst = mel.data.data() + std::size_t(t) * kMelBands;
        for (int b = 0; b < kMelBands; ++b) {
            const double* fb = bank.data.data() + std::size_t(b) * kSpectrumBins;
            double acc = 0.0;
            for (int k = 0; k < kSpectrumBins; ++k) acc += fb[k] * row[k];
            dst[b] = acc;
        }
    }
    return log_compress(mel);
}

std::vector<MelSpectrogram> clip_frames(const MelSpectrogram& spec, int clip_len, int stride) {
    if (clip_len < 1 || stride < 1)
        throw std::invalid_argument("frontend: clip_frames needs positive clip length and stride");
    if (spec.frames < clip_len)
        throw std::invalid_argument("frontend: clip_frames input has " + std::to_string(spec.frames) +
                                    " frames, need at least " + std::to_string(clip_len));
    int count = (spec.frames - clip_len) / stride + 1;
    std::vector<MelSpectrogram> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(crop_mel(spec, i * stride, clip_len));
    return out;
}

MelSpectrogram crop_mel(const MelSpectrogram& spec, int start, int len) {
    if (start < 0 || len < 1 || start + len > spec.frames)
        throw std::invalid_argument("frontend: crop [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") exceeds " +
                                    std::to_string(spec.frames) + " frames");
    MelSpectrogram out;
    out.frames = len;
    out.bands = spec.bands;
    out.values.assign(spec.values.begin() + std::size_t(start) * spec.bands,
                      spec.values.begin() + std::size_t(start + len) * spec.bands);
    return out;
}

Tensor mel_to_tensor(const MelSpectrogram& m) {
    Tensor t = Tensor::zeros({1, m.frames, m.bands});
    t.data = m.values;
    return t;
}

MelSpectrogram mel_from_tensor(const Tensor& t) {
    if (t.rank() != 3 || t.dims[0] != 1)
        throw std::invalid_argument("frontend: expected [1,frames,bands] tensor, got " + shape_str(t.dims));
    MelSpectrogram m;
    m.frames = t.dims[1];
    m.bands = t.dims[2];
    m.values = t.data;
    return m;
}

}  // namespace lp
