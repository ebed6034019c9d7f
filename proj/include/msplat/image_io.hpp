#pragma once

#include <filesystem>

#include "msplat/image.hpp"

namespace msplat {

/// Decodes an 8-bit or 16-bit PNG (gray, gray+alpha, RGB or RGBA) into a
/// 3-channel image in [0, 1]. Alpha is dropped.
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const Image& image, const std::filesystem::path& path);

/// Unquantized dump for exact comparisons. Layout (little-endian):
///   "MSFR" | u32 width | u32 height | u32 channels | width*height*channels f32,
/// row-major with interleaved channels.
void write_raw(const Image& image, const std::filesystem::path& path);
/// Throws FormatError on a bad magic or a size that disagrees with the header.
Image read_raw(const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit level, the same quantization
/// write_png applies.
Image quantize8(const Image& image);

}  // namespace msplat
