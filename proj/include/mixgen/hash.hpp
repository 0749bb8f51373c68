#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mixgen {

using Sha256Digest = std::array<uint8_t, 32>;

Sha256Digest sha256(const void* data, size_t len);
Sha256Digest sha256(const std::string& s);
std::string hex(const Sha256Digest& d);

}  // namespace mixgen
