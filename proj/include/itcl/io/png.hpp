#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace itcl::io {

// Minimal PNG support backed by zlib: 8-bit gray/RGB/RGBA, non-interlaced.
// Enough for the dataset directory layout and the transform debug exports;
// images from mainstream encoders (PIL, OpenCV defaults) decode fine.
struct Image8 {
    int width = 0, height = 0, channels = 0; // channels: 1, 3 or 4
    std::vector<uint8_t> pixels;             // row-major, interleaved
};

void write_png(const std::string& path, const Image8& img);
Image8 read_png(const std::string& path);

std::vector<uint8_t> encode_png(const Image8& img);
Image8 decode_png(const std::vector<uint8_t>& bytes);

} // namespace itcl::io
