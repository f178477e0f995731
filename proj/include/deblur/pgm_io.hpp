#pragma once

#include <filesystem>

#include "deblur/image.hpp"

namespace deblur {

// Binary portable graymap/pixmap readers. P5 at 8 or 16 bit (16-bit samples
// big-endian per the PNM convention); P6 color input is reduced to luminance
// with ITU-R 601 weights. Samples are scaled to [0,1] by maxval.
Image read_pnm(const std::filesystem::path& path);

// Binary P5 writer, maxval 255 or 65535. Pixels are clamped to [0,1] before
// quantization.
void write_pgm(const std::filesystem::path& path, const Image& img,
               int bit_depth = 16);

// Lossless raw container: little-endian u32 height, u32 width, then
// height·width doubles, row-major.
Image read_f64(const std::filesystem::path& path);
void write_f64(const std::filesystem::path& path, const Image& img);

}  // namespace deblur
