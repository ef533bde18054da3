#pragma once

#include <string>

#include "styleseg/core/types.hpp"

namespace styleseg {

/// Reads a PNG into a channel-first float image scaled to [0,1].
/// Palette, 16-bit, and alpha inputs are normalized to 8-bit gray or RGB.
Image read_png(const std::string& path);

/// Reads a PNG and binarizes it: any nonzero pixel (first channel) -> 1.
SegmentationMask read_png_mask(const std::string& path);

/// Writes a 1- or 3-channel image as an 8-bit PNG. Values are clamped to
/// [0,1] and quantized with round(v * 255).
void write_png(const std::string& path, const Image& image);

/// Writes a mask as an 8-bit grayscale PNG with foreground = 255.
void write_png_mask(const std::string& path, const SegmentationMask& mask);

}  // namespace styleseg
