#pragma once
#include <string>

#include "derain/image.hpp"

namespace derain {

// Reads an 8- or 16-bit PNG into float [0,1]. Gray and RGB are kept as 1 or 3
// channels; an alpha channel, if present, is dropped.
Image read_image_png(const std::string& path);

// bit_depth must be 8 or 16. Values are clipped and quantized to the grid.
void write_image_png(const std::string& path, const Image& img, int bit_depth = 16);

// Masks are stored as 8-bit gray with values {0, 255}.
Mask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const Mask& mask);

}  // namespace derain
