#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lp/frontend.hpp"

namespace lp {

/// Deterministic synthetic clip for a label. "vocal" is a harmonic stack with
/// vibrato and a slow amplitude envelope; "non_vocal" is a bass tone with
/// periodic broadband bursts. Duration must be at least 1.7 seconds.
Waveform synth_clip(const std::string& label, std::uint64_t seed, double duration_s);

struct ClipRecord {
    std::string id;
    std::string label;
    std::string split;
    std::string mspc_115;
    std::string mspc_128;
    std::uint64_t seed = 0;
};

struct CorpusManifest {
    std::vector<ClipRecord> records;
};

struct CorpusCounts {
    int train_per_label = 100;
    int val_per_label = 20;
    int test_per_label = 20;
};

/// Synthesises the corpus into out_dir, materialising a centred 115-frame and
/// a centred 128-frame spectrogram per clip plus manifest.jsonl. Paths in the
/// manifest are relative to the manifest's directory.
CorpusManifest build_corpus(const std::string& out_dir, const CorpusCounts& counts,
                            std::uint64_t seed, double duration_s = 2.0);

void write_manifest(const std::string& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::string& path);

struct LoadedClip {
    std::string id;
    int label = 0;  // 1 vocal, 0 non_vocal
    std::string split;
    std::uint64_t seed = 0;
    MelSpectrogram clip115;
    MelSpectrogram clip128;
};

struct LoadedCorpus {
    std::vector<LoadedClip> clips;
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    std::vector<std::size_t> train_vocal, train_nonvocal;
};

LoadedCorpus load_corpus(const std::string& manifest_path);

/// Fraction of pre-log mel band energy (time averaged) in bands whose centre
/// lies at or above the cutoff.
double band_energy_fraction_above(const Waveform& w, double cutoff_hz);

/// Centre frequency of the band with the largest time-averaged pre-log energy.
double dominant_band_center_hz(const Waveform& w);

}  // namespace lp
