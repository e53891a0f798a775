#include "lp/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lp/mspc.hpp"
#include "lp/networks.hpp"
#include "lp/rng.hpp"

namespace lp {
namespace {

const double kTwoPi = 2.0 * std::acos(-1.0);

void synth_vocal(Rng& rng, std::vector<double>& s) {
    double f0 = rng.uniform(110.0, 440.0);
    int partials = 6 + int(rng.uniform01() * 5.0);
    if (partials > 10) partials = 10;

    // Weak fundamental so most energy sits in the upper partials.
    std::vector<double> amp(partials + 1, 0.0), phase(partials + 1, 0.0);
    amp[1] = 0.25;
    phase[1] = rng.uniform(0.0, kTwoPi);
    for (int p = 2; p <= partials; ++p) {
        amp[p] = rng.uniform(0.7, 1.0) / std::sqrt(double(p));
        phase[p] = rng.uniform(0.0, kTwoPi);
    }

    double vib_rate = rng.uniform(5.0, 7.0);
    double vib_depth = rng.uniform(0.008, 0.012);
    double env_rate = rng.uniform(0.3, 1.0);
    double env_phase = rng.uniform(0.0, kTwoPi);

    double base = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double t = double(i) / kSampleRate;
        double f_inst = f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t));
        base += kTwoPi * f_inst / kSampleRate;
        double env = 0.8 + 0.2 * std::sin(kTwoPi * env_rate * t + env_phase);
        double acc = 0.0;
        for (int p = 1; p <= partials; ++p) acc += amp[p] * std::sin(double(p) * base + phase[p]);
        s[i] = env * acc;
    }
}

void synth_non_vocal(Rng& rng, std::vector<double>& s) {
    double bass_hz = rng.uniform(40.0, 80.0);
    double bass_phase = rng.uniform(0.0, kTwoPi);
    double period_s = rng.uniform(0.2, 0.4);
    double burst_s = rng.uniform(0.02, 0.04);
    double offset_s = rng.uniform(0.0, period_s);

    std::size_t period = std::size_t(period_s * kSampleRate);
    std::size_t burst = std::size_t(burst_s * kSampleRate);
    std::size_t offset = std::size_t(offset_s * kSampleRate);

    for (std::size_t i = 0; i < s.size(); ++i) {
        double t = double(i) / kSampleRate;
        s[i] = std::sin(kTwoPi * bass_hz * t + bass_phase);
        if ((i + period - offset % period) % period < burst) s[i] += 0.35 * (rng.uniform01() * 2.0 - 1.0);
    }
}

/// Time-averaged pre-log mel band energies.
std::vector<double> band_energy_profile(const Waveform& w) {
    Tensor mag = stft_magnitude(w);
    const Tensor& bank = mel_filterbank();
    int frames = mag.dims[0];
    std::vector<double> profile(kMelBands, 0.0);
    for (int t = 0; t < frames; ++t) {
        const double* row = mag.data.data() + std::size_t(t) * kSpectrumBins;
        for (int b = 0; b < kMelBands; ++b) {
            const double* fb = bank.data.data() + std::size_t(b) * kSpectrumBins;
            double acc = 0.0;
            for (int k = 0; k < kSpectrumBins; ++k) acc += fb[k] * row[k];
            profile[std::size_t(b)] += acc;
        }
    }
    for (double& v : profile) v /= double(frames);
    return profile;
}

[[noreturn]] void manifest_fail(const std::string& path, std::size_t line, const std::string& why) {
    throw std::runtime_error("corpus: " + path + " line " + std::to_string(line) + ": " + why);
}

}  // namespace

Waveform synth_clip(const std::string& label, std::uint64_t seed, double duration_s) {
    if (duration_s < 1.7)
        throw std::invalid_argument("synth: clip duration must be at least 1.7 s, got " +
                                    std::to_string(duration_s));
    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.assign(std::size_t(duration_s * kSampleRate + 0.5), 0.0);

    if (label == "vocal") {
        Rng rng(Rng::derive(seed, 1));
        synth_vocal(rng, w.samples);
    } else if (label == "non_vocal") {
        Rng rng(Rng::derive(seed, 2));
        synth_non_vocal(rng, w.samples);
    } else {
        throw std::invalid_argument("synth: unknown label '" + label + "' (want vocal or non_vocal)");
    }

    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    double scale = 0.9 / peak;
    for (double& v : w.samples) v *= scale;
    return w;
}

CorpusManifest build_corpus(const std::string& out_dir, const CorpusCounts& counts,
                            std::uint64_t seed, double duration_s) {
    std::filesystem::create_directories(out_dir);
    CorpusManifest man;
    std::uint64_t counter = 0;

    auto add = [&](const std::string& split, const std::string& label, int count) {
        for (int i = 0; i < count; ++i) {
            ClipRecord rec;
            rec.seed = Rng::derive(seed, counter++);
            rec.label = label;
            rec.split = split;
            rec.id = split + "_" + label + "_" + std::to_string(i);
            rec.mspc_115 = rec.id + "_115.mspc";
            rec.mspc_128 = rec.id + "_128.mspc";

            Waveform w = synth_clip(label, rec.seed, duration_s);
            MelSpectrogram mel = waveform_to_mel(w);
            if (mel.frames < kGanFrames)
                throw std::invalid_argument("synth: corpus clips need at least " +
                                            std::to_string(kGanFrames) + " frames, got " +
                                            std::to_string(mel.frames) + "; raise the duration");
            write_mspc(out_dir + "/" + rec.mspc_115,
                       crop_mel(mel, (mel.frames - kClipFrames) / 2, kClipFrames));
            write_mspc(out_dir + "/" + rec.mspc_128,
                       crop_mel(mel, (mel.frames - kGanFrames) / 2, kGanFrames));
            man.records.push_back(rec);
        }
    };

    add("train", "vocal", counts.train_per_label);
    add("train", "non_vocal", counts.train_per_label);
    add("val", "vocal", counts.val_per_label);
    add("val", "non_vocal", counts.val_per_label);
    add("test", "vocal", counts.test_per_label);
    add("test", "non_vocal", counts.test_per_label);

    write_manifest(out_dir + "/manifest.jsonl", man);
    return man;
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("corpus: " + path + ": cannot open for writing");
    for (const ClipRecord& rec : manifest.records) {
        nlohmann::json j;
        j["id"] = rec.id;
        j["label"] = rec.label;
        j["split"] = rec.split;
        j["mspc_115"] = rec.mspc_115;
        j["mspc_128"] = rec.mspc_128;
        j["seed"] = rec.seed;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("corpus: " + path + ": write failed");
}

CorpusManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("corpus: " + path + ": cannot open");
    CorpusManifest man;
    std::string line;
    std::size_t line_no = 0;
    const std::vector<std::string> keys{"id", "label", "split", "mspc_115", "mspc_128", "seed"};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            manifest_fail(path, line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) manifest_fail(path, line_no, "record is not an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
                manifest_fail(path, line_no, "unknown key '" + it.key() + "'");
        }
        for (const std::string& k : keys)
            if (!j.contains(k)) manifest_fail(path, line_no, "missing key '" + k + "'");

        ClipRecord rec;
        try {
            rec.id = j["id"].get<std::string>();
            rec.label = j["label"].get<std::string>();
            rec.split = j["split"].get<std::string>();
            rec.mspc_115 = j["mspc_115"].get<std::string>();
            rec.mspc_128 = j["mspc_128"].get<std::string>();
            rec.seed = j["seed"].get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            manifest_fail(path, line_no, std::string("bad field type: ") + e.what());
        }
        man.records.push_back(std::move(rec));
    }
    return man;
}

LoadedCorpus load_corpus(const std::string& manifest_path) {
    CorpusManifest man = read_manifest(manifest_path);
    std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

    LoadedCorpus corpus;
    corpus.clips.reserve(man.records.size());
    for (const ClipRecord& rec : man.records) {
        LoadedClip clip;
        clip.id = rec.id;
        clip.split = rec.split;
        clip.seed = rec.seed;
        if (rec.label == "vocal") clip.label = 1;
        else if (rec.label == "non_vocal") clip.label = 0;
        else throw std::runtime_error("corpus: record " + rec.id + " has unknown label '" + rec.label + "'");

        clip.clip115 = read_mspc((base / rec.mspc_115).string());
        clip.clip128 = read_mspc((base / rec.mspc_128).string());
        if (clip.clip115.frames != kClipFrames || clip.clip115.bands != kMelBands)
            throw std::runtime_error("corpus: " + rec.mspc_115 + " is not a 115x80 spectrogram");
        if (clip.clip128.frames != kGanFrames || clip.clip128.bands != kMelBands)
            throw std::runtime_error("corpus: " + rec.mspc_128 + " is not a 128x80 spectrogram");

        std::size_t idx = corpus.clips.size();
        if (rec.split == "train") {
            corpus.train_idx.push_back(idx);
            (clip.label == 1 ? corpus.train_vocal : corpus.train_nonvocal).push_back(idx);
        } else if (rec.split == "val") {
            corpus.val_idx.push_back(idx);
        } else if (rec.split == "test") {
            corpus.test_idx.push_back(idx);
        } else {
            throw std::runtime_error("corpus: record " + rec.id + " has unknown split '" + rec.split + "'");
        }
        corpus.clips.push_back(std::move(clip));
    }
    return corpus;
}

double band_energy_fraction_above(const Waveform& w, double cutoff_hz) {
    std::vector<double> profile = band_energy_profile(w);
    double total = 0.0, above = 0.0;
    for (int b = 0; b < kMelBands; ++b) {
        total += profile[std::size_t(b)];
        if (mel_band_center_hz(b) >= cutoff_hz) above += profile[std::size_t(b)];
    }
    return total > 0.0 ? above / total : 0.0;
}

double dominant_band_center_hz(const Waveform& w) {
    std::vector<double> profile = band_energy_profile(w);
    int best = 0;
    for (int b = 1; b < kMelBands; ++b)
        if (profile[std::size_t(b)] > profile[std::size_t(best)]) best = b;
    return mel_band_center_hz(best);
}

}  // namespace lp
