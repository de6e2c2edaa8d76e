#pragma once

#include <cstdint>
#include <span>

namespace plucker {

// CRC-32 (IEEE 802.3): reflected, polynomial 0xEDB88320, init and final xor
// 0xFFFFFFFF. `crc` continues a previous call; pass 0 to start.
std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t crc = 0);

}  // namespace plucker
