#pragma once

#include <cstdint>
#include <string>

namespace t2 {

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed = 0);
uint32_t crc32_file(const std::string& path);  // IoError if unreadable
std::string crc32_hex(uint32_t crc);           // zero-padded 8 hex digits

}  // namespace t2
