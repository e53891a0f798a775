#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace lp {

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len);
std::array<std::uint8_t, 32> sha256(const std::string& s);
std::string hex_digest(const std::array<std::uint8_t, 32>& digest);

}  // namespace lp
