#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lp/fft.hpp"
#include "lp/frontend.hpp"
#include "lp/mspc.hpp"
#include "lp/rng.hpp"
#include "lp/sha256.hpp"
#include "lp/wav.hpp"

using namespace lp;

namespace {

const double kPi = std::acos(-1.0);

Waveform sine_wave(double freq_hz, double amplitude, std::size_t samples) {
    Waveform w;
    w.samples.resize(samples);
    for (std::size_t i = 0; i < samples; ++i)
        w.samples[i] = amplitude * std::sin(2.0 * kPi * freq_hz * double(i) / kSampleRate);
    return w;
}

std::filesystem::path fresh_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::path("t_frontend") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void patch(const std::filesystem::path& p, std::size_t offset, const std::string& bytes) {
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(bool(f));
    f.seekp(std::streamoff(offset));
    f.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("sha256 matches published vectors") {
    CHECK(hex_digest(sha256(std::string("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hex_digest(sha256(std::string(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    // Forces the two-block padding path (56 bytes leaves no room for the length).
    CHECK(hex_digest(sha256(std::string("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("fft matches a naive dft") {
    Rng rng(77);
    std::vector<double> re(16), im(16);
    for (int i = 0; i < 16; ++i) {
        re[i] = rng.normal();
        im[i] = rng.normal();
    }
    std::vector<double> dft_re(16, 0.0), dft_im(16, 0.0);
    for (int k = 0; k < 16; ++k) {
        for (int t = 0; t < 16; ++t) {
            double ang = -2.0 * kPi * k * t / 16.0;
            double c = std::cos(ang), s = std::sin(ang);
            dft_re[k] += re[t] * c - im[t] * s;
            dft_im[k] += re[t] * s + im[t] * c;
        }
    }
    fft_complex(re, im);
    for (int k = 0; k < 16; ++k) {
        CHECK(re[k] == doctest::Approx(dft_re[k]).epsilon(1e-10));
        CHECK(im[k] == doctest::Approx(dft_im[k]).epsilon(1e-10));
    }

    std::vector<double> bad_re(12), bad_im(12);
    CHECK_THROWS_AS(fft_complex(bad_re, bad_im), std::invalid_argument);
}

TEST_CASE("frame count follows the hop formula") {
    CHECK(frame_count(1023) == 0);
    CHECK(frame_count(1024) == 1);
    CHECK(frame_count(1024 + 314) == 1);
    CHECK(frame_count(1024 + 315) == 2);
    CHECK(frame_count(44100) == 137);
    CHECK(frame_count(115 * 315 + 1024) == 116);

    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t len = std::size_t(rng.uniform01() * 60000.0);
        int expect = 0;
        for (std::size_t pos = 0; pos + 1024 <= len; pos += 315) ++expect;
        CHECK(frame_count(len) == expect);
    }
}

TEST_CASE("silence maps to the log floor everywhere") {
    Waveform w;
    w.samples.assign(4096, 0.0);
    MelSpectrogram mel = waveform_to_mel(w);
    CHECK(mel.frames == frame_count(4096));
    CHECK(mel.bands == kMelBands);
    double floor_val = std::log(kLogFloor);
    for (double v : mel.values) CHECK(v == floor_val);
}

TEST_CASE("440 Hz tone peaks in the expected stft bin") {
    Waveform w = sine_wave(440.0, 0.5, 22050);
    Tensor mag = stft_magnitude(w);
    REQUIRE(mag.dims == Shape{frame_count(22050), kSpectrumBins});
    // Bin width is 22050/1024, so 440 Hz sits between bins 20 and 21.
    for (int t = 0; t < mag.dims[0]; ++t) {
        const double* row = mag.data.data() + std::size_t(t) * kSpectrumBins;
        int best = 0;
        for (int k = 1; k < kSpectrumBins; ++k)
            if (row[k] > row[best]) best = k;
        CHECK(best >= 20);
        CHECK(best <= 21);
    }
}

TEST_CASE("dc input peaks in bin zero") {
    Waveform w;
    w.samples.assign(4096, 0.25);
    Tensor mag = stft_magnitude(w);
    for (int t = 0; t < mag.dims[0]; ++t) {
        const double* row = mag.data.data() + std::size_t(t) * kSpectrumBins;
        for (int k = 1; k < kSpectrumBins; ++k) CHECK(row[0] > row[k]);
    }
}

TEST_CASE("mel filterbank triangles") {
    const Tensor& bank = mel_filterbank();
    REQUIRE(bank.dims == Shape{kMelBands, kSpectrumBins});

    for (double v : bank.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (int b = 0; b < kMelBands; ++b) {
        double row_max = 0.0;
        for (int k = 0; k < kSpectrumBins; ++k)
            row_max = std::max(row_max, bank.data[std::size_t(b) * kSpectrumBins + k]);
        CHECK(row_max > 0.0);
    }

    for (int b = 0; b < kMelBands; ++b) {
        double c = mel_band_center_hz(b);
        CHECK(mel_filter_response(b, c) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mel_filter_response(b, c * 0.999) < 1.0);
        CHECK(mel_filter_response(b, c * 1.001) < 1.0);
        // Each triangle's peak is the left edge of the next one over.
        if (b + 1 < kMelBands) CHECK(mel_filter_response(b + 1, c) == 0.0);
        if (b > 0) CHECK(mel_filter_response(b - 1, c) == 0.0);
    }
    CHECK(mel_band_center_hz(0) > kMelMinHz);
    CHECK(mel_band_center_hz(kMelBands - 1) < kMelMaxHz);
    CHECK_THROWS_AS(mel_filter_response(kMelBands, 100.0), std::invalid_argument);
}

TEST_CASE("doubling the waveform doubles pre-log mel energy") {
    Waveform w1 = sine_wave(523.25, 0.3, 8192);
    Waveform w2 = sine_wave(523.25, 0.6, 8192);
    Tensor m1 = stft_magnitude(w1);
    Tensor m2 = stft_magnitude(w2);
    const Tensor& bank = mel_filterbank();
    for (int t = 0; t < m1.dims[0]; ++t) {
        for (int b = 0; b < kMelBands; ++b) {
            double e1 = 0.0, e2 = 0.0;
            for (int k = 0; k < kSpectrumBins; ++k) {
                double f = bank.data[std::size_t(b) * kSpectrumBins + k];
                e1 += f * m1.data[std::size_t(t) * kSpectrumBins + k];
                e2 += f * m2.data[std::size_t(t) * kSpectrumBins + k];
            }
            CHECK(e2 == doctest::Approx(2.0 * e1).epsilon(1e-12));
        }
    }
}

TEST_CASE("log compression clamps at the floor and rejects negatives") {
    Tensor x = Tensor::zeros({1, kMelBands});
    x.data[0] = 0.0;
    x.data[1] = 1e-9;
    x.data[2] = 10.0;
    x.data[3] = 1.0;
    MelSpectrogram out = log_compress(x);
    CHECK(out.at(0, 0) == doctest::Approx(std::log(1e-7)).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(std::log(1e-7)).epsilon(1e-15));
    CHECK(out.at(0, 2) == doctest::Approx(2.302585092994046).epsilon(1e-15));
    CHECK(out.at(0, 3) == 0.0);
    CHECK(std::log(1e-7) == doctest::Approx(-16.11809565095832).epsilon(1e-12));

    x.data[5] = -0.5;
    CHECK_THROWS_AS(log_compress(x), std::domain_error);
}

TEST_CASE("waveform_to_mel output respects the floor and is deterministic") {
    Waveform w = sine_wave(440.0, 0.9, 37249);
    MelSpectrogram a = waveform_to_mel(w);
    MelSpectrogram b = waveform_to_mel(w);
    REQUIRE(a.frames == 116);
    REQUIRE(a.frames >= 115);
    double floor_val = std::log(kLogFloor);
    for (double v : a.values) CHECK(v >= floor_val);
    CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);

    // The tone should excite the band whose centre is nearest 440 Hz.
    int nearest = 0;
    for (int b2 = 1; b2 < kMelBands; ++b2)
        if (std::abs(mel_band_center_hz(b2) - 440.0) < std::abs(mel_band_center_hz(nearest) - 440.0))
            nearest = b2;
    int hot = 0;
    for (int b2 = 1; b2 < kMelBands; ++b2)
        if (a.at(50, b2) > a.at(50, hot)) hot = b2;
    CHECK(std::abs(hot - nearest) <= 1);
}

TEST_CASE("clip_frames enumerates strided excerpts") {
    MelSpectrogram spec;
    spec.frames = 215;
    spec.bands = kMelBands;
    spec.values.resize(std::size_t(spec.frames) * spec.bands);
    for (std::size_t i = 0; i < spec.values.size(); ++i) spec.values[i] = double(i % 997);

    auto clips = clip_frames(spec, 115, 50);
    REQUIRE(clips.size() == 3);
    for (int i = 0; i < 3; ++i) {
        MelSpectrogram want = crop_mel(spec, i * 50, 115);
        CHECK(clips[i].frames == 115);
        CHECK(clips[i].values == want.values);
    }

    CHECK(clip_frames(spec, 215, 1).size() == 1);
    MelSpectrogram tiny;
    tiny.frames = 10;
    tiny.bands = kMelBands;
    tiny.values.resize(10 * kMelBands, 0.0);
    CHECK_THROWS_AS(clip_frames(tiny, 115, 50), std::invalid_argument);

    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        int frames = 1 + int(rng.uniform01() * 400.0);
        int clip = 1 + int(rng.uniform01() * frames);
        if (clip > frames) clip = frames;
        int stride = 1 + int(rng.uniform01() * 200.0);
        int expect = 0;
        for (int start = 0; start + clip <= frames; start += stride) ++expect;
        MelSpectrogram s;
        s.frames = frames;
        s.bands = 2;
        s.values.resize(std::size_t(frames) * 2, 0.0);
        CHECK(int(clip_frames(s, clip, stride).size()) == expect);
    }
}

TEST_CASE("mel tensor conversions round-trip") {
    MelSpectrogram spec;
    spec.frames = 7;
    spec.bands = kMelBands;
    spec.values.resize(std::size_t(7) * kMelBands);
    Rng rng(5);
    for (auto& v : spec.values) v = rng.normal();
    Tensor t = mel_to_tensor(spec);
    REQUIRE(t.dims == Shape{1, 7, kMelBands});
    MelSpectrogram back = mel_from_tensor(t);
    CHECK(back.frames == spec.frames);
    CHECK(back.values == spec.values);
}

TEST_CASE("mspc files round-trip bit-exactly") {
    auto dir = fresh_dir("mspc");
    MelSpectrogram spec;
    spec.frames = 115;
    spec.bands = kMelBands;
    spec.values.resize(std::size_t(115) * kMelBands);
    Rng rng(9);
    for (auto& v : spec.values) v = rng.normal() * 4.0 - 8.0;

    auto p1 = dir / "a.mspc";
    auto p2 = dir / "b.mspc";
    write_mspc(p1.string(), spec);
    MelSpectrogram loaded = read_mspc(p1.string());
    CHECK(loaded.frames == spec.frames);
    CHECK(loaded.bands == spec.bands);
    for (std::size_t i = 0; i < spec.values.size(); ++i)
        CHECK(loaded.values[i] == double(float(spec.values[i])));

    write_mspc(p2.string(), loaded);
    CHECK(slurp(p1) == slurp(p2));

    std::string bytes = slurp(p1);
    CHECK(bytes.substr(0, 4) == "MSPC");
    CHECK(std::uint8_t(bytes[4]) == 1);
}

TEST_CASE("mspc reader rejects malformed files") {
    auto dir = fresh_dir("mspc_bad");
    MelSpectrogram spec;
    spec.frames = 3;
    spec.bands = 4;
    spec.values.assign(12, 1.5);
    auto good = dir / "good.mspc";
    write_mspc(good.string(), spec);
    std::string bytes = slurp(good);

    auto write_raw = [&dir](const std::string& name, const std::string& content) {
        auto p = dir / name;
        std::ofstream out(p, std::ios::binary);
        out.write(content.data(), std::streamsize(content.size()));
        return p;
    };

    auto short_hdr = write_raw("short.mspc", bytes.substr(0, 10));
    CHECK_THROWS_WITH_AS(read_mspc(short_hdr.string()), doctest::Contains("truncated header"),
                         std::runtime_error);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    auto magic = write_raw("magic.mspc", bad_magic);
    CHECK_THROWS_WITH_AS(read_mspc(magic.string()), doctest::Contains("bad magic"), std::runtime_error);

    std::string bad_ver = bytes;
    bad_ver[4] = 2;
    auto ver = write_raw("ver.mspc", bad_ver);
    CHECK_THROWS_WITH_AS(read_mspc(ver.string()), doctest::Contains("unsupported version"),
                         std::runtime_error);

    auto trunc = write_raw("trunc.mspc", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_WITH_AS(read_mspc(trunc.string()), doctest::Contains("truncated payload"),
                         std::runtime_error);

    auto trailing = write_raw("trail.mspc", bytes + "x");
    CHECK_THROWS_WITH_AS(read_mspc(trailing.string()), doctest::Contains("trailing"), std::runtime_error);

    CHECK_THROWS_WITH_AS(read_mspc((dir / "absent.mspc").string()), doctest::Contains("cannot open"),
                         std::runtime_error);
}

TEST_CASE("wav ingestion accepts pcm16 mono 22050 and nothing else") {
    auto dir = fresh_dir("wav");
    Waveform w = sine_wave(440.0, 0.9, 22050);
    auto good = dir / "good.wav";
    write_wav_pcm16(good.string(), w);

    Waveform back = ingest_wav(good.string());
    REQUIRE(back.samples.size() == w.samples.size());
    CHECK(back.sample_rate == 22050);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < back.samples.size(); ++i) {
        CHECK(std::abs(back.samples[i] - w.samples[i]) <= 0.5 / 32768.0 + 1e-12);
        max_abs = std::max(max_abs, std::abs(back.samples[i]));
    }
    CHECK(max_abs == doctest::Approx(0.9).epsilon(1e-3));

    auto copy_to = [&](const std::string& name) {
        auto p = dir / name;
        std::filesystem::copy_file(good, p, std::filesystem::copy_options::overwrite_existing);
        return p;
    };

    auto stereo = copy_to("stereo.wav");
    patch(stereo, 22, std::string("\x02\x00", 2));
    CHECK_THROWS_WITH_AS(ingest_wav(stereo.string()), doctest::Contains("channel count"),
                         std::runtime_error);

    auto rate = copy_to("rate.wav");
    patch(rate, 24, std::string("\x44\xac\x00\x00", 4));
    CHECK_THROWS_WITH_AS(ingest_wav(rate.string()), doctest::Contains("sample rate"), std::runtime_error);

    auto bits = copy_to("bits.wav");
    patch(bits, 34, std::string("\x08\x00", 2));
    CHECK_THROWS_WITH_AS(ingest_wav(bits.string()), doctest::Contains("bit depth"), std::runtime_error);

    auto enc = copy_to("float.wav");
    patch(enc, 20, std::string("\x03\x00", 2));
    CHECK_THROWS_WITH_AS(ingest_wav(enc.string()), doctest::Contains("encoding"), std::runtime_error);

    auto nodata = copy_to("nodata.wav");
    patch(nodata, 36, "dato");
    CHECK_THROWS_WITH_AS(ingest_wav(nodata.string()), doctest::Contains("missing data chunk"),
                         std::runtime_error);

    auto notriff = copy_to("notriff.wav");
    patch(notriff, 0, "JUNK");
    CHECK_THROWS_WITH_AS(ingest_wav(notriff.string()), doctest::Contains("not a RIFF"), std::runtime_error);

    CHECK_THROWS_WITH_AS(ingest_wav((dir / "absent.wav").string()), doctest::Contains("cannot open"),
                         std::runtime_error);
}
