#pragma once

#include <string>

#include "t2/core/tensor.hpp"

namespace t2 {

// Raw 3-plane float array with an 8-byte header:
//   bytes 0..3  magic "T2IL"
//   bytes 4..5  height, u16 little-endian
//   bytes 6..7  width,  u16 little-endian
// followed by 3*h*w IEEE-754 float32 little-endian values, channel plane by
// channel plane, rows top to bottom. Used for stored illumination maps.
void write_t2il(const std::string& path, const Tensor<float>& planes);
Tensor<float> read_t2il(const std::string& path);

}  // namespace t2
