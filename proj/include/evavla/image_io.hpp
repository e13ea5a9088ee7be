#pragma once

#include <filesystem>

#include "evavla/scene_transforms.hpp"

namespace evavla {

/// 8-bit RGB PNG; each channel becomes value / 255.
Image read_png(const std::filesystem::path& path);

/// Quantizes with round(v * 255).
void write_png(const Image& img, const std::filesystem::path& path);

}  // namespace evavla
