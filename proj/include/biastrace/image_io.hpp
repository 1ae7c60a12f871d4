#pragma once

#include <filesystem>

#include "biastrace/types.hpp"

namespace biastrace {

/// Reads any 8-bit PNG and converts to interleaved RGB (alpha dropped).
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const RgbImage& image, const std::filesystem::path& path);

/// Reads a grayscale PNG mask; any nonzero sample is inside.
MaskImage read_mask_png(const std::filesystem::path& path);
/// Inside pixels are written as 255, outside as 0.
void write_mask_png(const MaskImage& mask, const std::filesystem::path& path);

}  // namespace biastrace
