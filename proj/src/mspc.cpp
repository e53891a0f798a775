#include "lp/mspc.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace lp {
namespace {

constexpr std::uint16_t kMspcVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(char(v & 0xff));
    buf.push_back(char(v >> 8));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) { return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8); }

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("mspc: " + path + ": " + why);
}

}  // namespace

void write_mspc(const std::string& path, const MelSpectrogram& spec) {
    if (spec.frames < 0 || spec.bands < 0 ||
        spec.values.size() != std::size_t(spec.frames) * std::size_t(spec.bands))
        throw std::invalid_argument("mspc: spectrogram dims do not match value count");

    std::string buf;
    buf.reserve(14 + spec.values.size() * 4);
    buf.append("MSPC", 4);
    put_u16(buf, kMspcVersion);
    put_u32(buf, std::uint32_t(spec.frames));
    put_u32(buf, std::uint32_t(spec.bands));
    for (double v : spec.values) {
        float f = float(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(buf, bits);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) fail(path, "write failed");
}

MelSpectrogram read_mspc(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < 14) fail(path, "truncated header");
    if (std::memcmp(raw.data(), "MSPC", 4) != 0) fail(path, "bad magic");
    std::uint16_t version = get_u16(raw.data() + 4);
    if (version != kMspcVersion) fail(path, "unsupported version " + std::to_string(version));
    std::uint32_t frames = get_u32(raw.data() + 6);
    std::uint32_t bands = get_u32(raw.data() + 10);
    std::size_t want = 14 + std::size_t(frames) * bands * 4;
    if (raw.size() < want) fail(path, "truncated payload");
    if (raw.size() > want) fail(path, "trailing bytes after payload");

    MelSpectrogram spec;
    spec.frames = int(frames);
    spec.bands = int(bands);
    spec.values.resize(std::size_t(frames) * bands);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        std::uint32_t bits = get_u32(raw.data() + 14 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        spec.values[i] = double(f);
    }
    return spec;
}

}  // namespace lp
