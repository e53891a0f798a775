#include "lp/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace lp {
namespace {

std::uint16_t get_u16(const unsigned char* p) { return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8); }

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("wav: " + path + ": " + why);
}

}  // namespace

Waveform ingest_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < 12) fail(path, "truncated RIFF header");
    if (std::memcmp(raw.data(), "RIFF", 4) != 0) fail(path, "not a RIFF file");
    if (std::memcmp(raw.data() + 8, "WAVE", 4) != 0) fail(path, "not a WAVE file");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= raw.size()) {
        const unsigned char* hdr = raw.data() + pos;
        std::uint32_t chunk_len = get_u32(hdr + 4);
        std::size_t body = pos + 8;
        if (body + chunk_len > raw.size()) fail(path, "truncated chunk");
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) fail(path, "fmt chunk too short");
            format = get_u16(raw.data() + body);
            channels = get_u16(raw.data() + body + 2);
            rate = get_u32(raw.data() + body + 4);
            bits = get_u16(raw.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = raw.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);
    }

    if (!have_fmt) fail(path, "missing fmt chunk");
    if (format != 1) fail(path, "unsupported encoding (want PCM, got format tag " + std::to_string(format) + ")");
    if (bits != 16) fail(path, "unsupported bit depth (want 16, got " + std::to_string(bits) + ")");
    if (channels != 1) fail(path, "unsupported channel count (want mono, got " + std::to_string(channels) + ")");
    if (rate != 22050) fail(path, "unsupported sample rate (want 22050, got " + std::to_string(rate) + ")");
    if (data == nullptr) fail(path, "missing data chunk");

    Waveform w;
    w.sample_rate = 22050;
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        std::int16_t s = std::int16_t(get_u16(data + 2 * i));
        w.samples[i] = double(s) / 32768.0;
    }
    return w;
}

void write_wav_pcm16(const std::string& path, const Waveform& w) {
    std::uint32_t data_len = std::uint32_t(w.samples.size() * 2);
    std::string buf;
    buf.reserve(44 + data_len);
    auto put_u16 = [&buf](std::uint16_t v) {
        buf.push_back(char(v & 0xff));
        buf.push_back(char(v >> 8));
    };
    auto put_u32 = [&buf](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
    };
    buf.append("RIFF", 4);
    put_u32(36 + data_len);
    buf.append("WAVE", 4);
    buf.append("fmt ", 4);
    put_u32(16);
    put_u16(1);
    put_u16(1);
    put_u32(std::uint32_t(w.sample_rate));
    put_u32(std::uint32_t(w.sample_rate) * 2);
    put_u16(2);
    put_u16(16);
    buf.append("data", 4);
    put_u32(data_len);
    for (double v : w.samples) {
        double scaled = v * 32768.0;
        if (scaled > 32767.0) scaled = 32767.0;
        if (scaled < -32768.0) scaled = -32768.0;
        std::int16_t s = std::int16_t(scaled >= 0 ? scaled + 0.5 : scaled - 0.5);
        put_u16(std::uint16_t(s));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) fail(path, "write failed");
}

}  // namespace lp
