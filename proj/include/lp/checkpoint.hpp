#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lp/networks.hpp"
#include "lp/tensor.hpp"

namespace lp {

/// Binary parameter container: magic "NPRM", u16 version, u32 tensor count,
/// then per tensor a u16 name length, the name, a u8 rank, rank u32 dims and
/// the float32 payload. The file ends with the 32-byte fingerprint of the
/// network the parameters belong to. Little endian throughout.
struct Checkpoint {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;
    std::array<std::uint8_t, 32> fingerprint{};
};

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const std::vector<Tensor>& params);
Checkpoint load_checkpoint(const std::string& path);

/// Validates the fingerprint and the name/shape layout against a spec and
/// returns the tensors in instantiation order.
std::vector<Tensor> checkpoint_params(const Checkpoint& ckpt, const NetworkSpec& spec);

std::vector<Tensor> load_params(const std::string& path, const NetworkSpec& spec);

}  // namespace lp
