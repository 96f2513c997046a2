#pragma once

#include <string>

#include "t2/core/tensor.hpp"

namespace t2 {

// 8-bit RGB PNG, single image (n == 1), values in [0,1]. Writing quantizes
// with round(255 v); reading returns byte/255, so a write/read round trip is
// exact on already-quantized data. Grayscale, palette, 16-bit, and alpha
// inputs are normalized to RGB8 on read.
void write_png_rgb8(const std::string& path, const Tensor<float>& image);
Tensor<float> read_png_rgb8(const std::string& path);

}  // namespace t2
