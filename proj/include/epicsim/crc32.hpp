#pragma once

#include <cstdint>
#include <span>

namespace epicsim {

/// CRC-32, IEEE polynomial 0xEDB88320 (reflected), init and xorout 0xFFFFFFFF.
std::uint32_t crc32(std::span<const std::uint8_t> data);

}  // namespace epicsim
