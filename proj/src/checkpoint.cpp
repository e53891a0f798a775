#include "lp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lp/sha256.hpp"

namespace lp {
namespace {

constexpr std::uint16_t kNprmVersion = 1;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("checkpoint: " + path + ": " + why);
}

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(char(v & 0xff));
    buf.push_back(char(v >> 8));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& path;
    const unsigned char* p;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > len) fail(path, std::string("truncated while reading ") + what);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = std::uint16_t(p[pos]) | (std::uint16_t(p[pos + 1]) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = std::uint32_t(p[pos]) | (std::uint32_t(p[pos + 1]) << 8) |
                          (std::uint32_t(p[pos + 2]) << 16) | (std::uint32_t(p[pos + 3]) << 24);
        pos += 4;
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const std::vector<Tensor>& params) {
    std::vector<std::string> names = param_names(spec);
    if (names.size() != params.size())
        throw std::invalid_argument("checkpoint: " + spec.name + " has " + std::to_string(names.size()) +
                                    " parameters, got " + std::to_string(params.size()) + " tensors");

    std::string buf;
    buf.append("NPRM", 4);
    put_u16(buf, kNprmVersion);
    put_u32(buf, std::uint32_t(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& name = names[i];
        const Tensor& t = params[i];
        put_u16(buf, std::uint16_t(name.size()));
        buf.append(name);
        buf.push_back(char(t.rank()));
        for (int d : t.dims) put_u32(buf, std::uint32_t(d));
        for (double v : t.data) {
            float f = float(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(buf, bits);
        }
    }
    auto fp = spec_fingerprint(spec);
    buf.append(reinterpret_cast<const char*>(fp.data()), fp.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) fail(path, "write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{path, reinterpret_cast<const unsigned char*>(raw.data()), raw.size()};
    r.need(4, "magic");
    if (std::memcmp(raw.data(), "NPRM", 4) != 0) fail(path, "bad magic");
    r.pos = 4;
    std::uint16_t version = r.u16("version");
    if (version != kNprmVersion) fail(path, "unsupported version " + std::to_string(version));
    std::uint32_t count = r.u32("tensor count");

    Checkpoint ckpt;
    ckpt.names.reserve(count);
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = r.u16("tensor name length");
        r.need(name_len, "tensor name");
        ckpt.names.emplace_back(raw.data() + r.pos, name_len);
        r.pos += name_len;
        r.need(1, "tensor rank");
        int rank = int(r.p[r.pos]);
        r.pos += 1;
        Shape dims(rank);
        std::int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            dims[d] = int(r.u32("tensor dims"));
            numel *= dims[d];
        }
        Tensor t = Tensor::zeros(dims);
        for (std::int64_t k = 0; k < numel; ++k) {
            std::uint32_t bits = r.u32("tensor payload");
            float f;
            std::memcpy(&f, &bits, 4);
            t.data[std::size_t(k)] = double(f);
        }
        ckpt.tensors.push_back(std::move(t));
    }
    r.need(32, "fingerprint");
    std::memcpy(ckpt.fingerprint.data(), r.p + r.pos, 32);
    r.pos += 32;
    if (r.pos != r.len) fail(path, "trailing bytes after fingerprint");
    return ckpt;
}

std::vector<Tensor> checkpoint_params(const Checkpoint& ckpt, const NetworkSpec& spec) {
    auto want_fp = spec_fingerprint(spec);
    if (ckpt.fingerprint != want_fp)
        throw std::runtime_error("checkpoint: fingerprint mismatch, file was not saved for network '" +
                                 spec.name + "'");
    std::vector<std::string> names = param_names(spec);
    std::vector<Shape> shapes = param_shapes(spec);
    if (ckpt.tensors.size() != names.size())
        throw std::runtime_error("checkpoint: tensor count " + std::to_string(ckpt.tensors.size()) +
                                 " does not match network '" + spec.name + "' (" +
                                 std::to_string(names.size()) + ")");
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (ckpt.names[i] != names[i])
            throw std::runtime_error("checkpoint: tensor " + std::to_string(i) + " is named '" +
                                     ckpt.names[i] + "', want '" + names[i] + "'");
        if (ckpt.tensors[i].dims != shapes[i])
            throw std::runtime_error("checkpoint: tensor " + ckpt.names[i] + " has shape " +
                                     shape_str(ckpt.tensors[i].dims) + ", want " + shape_str(shapes[i]));
    }
    return ckpt.tensors;
}

std::vector<Tensor> load_params(const std::string& path, const NetworkSpec& spec) {
    return checkpoint_params(load_checkpoint(path), spec);
}

}  // namespace lp
