#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>

#include <zlib.h>

namespace cwr {

/// CRC-32 of a byte range as 8 lowercase hex digits.
inline std::string crc32_hex(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in bounded pieces
    constexpr std::size_t piece = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += piece) {
        const std::size_t len = std::min(piece, bytes.size() - off);
        crc = crc32(crc, bytes.data() + off, static_cast<uInt>(len));
    }
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc & 0xffffffffUL));
    return buf;
}

}  // namespace cwr
