#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "gfm/raster/types.hpp"

namespace gfm::mae {

// 8-bit RGB PNG of one timestep, mapping reflectance [0, max_reflectance] to [0, 255].
void write_rgb_preview(const raster::RasterChip& chip, std::size_t timestep,
                       const std::filesystem::path& path,
                       const std::array<std::string, 3>& bands = {"B04", "B03", "B02"},
                       double max_reflectance = 3000.0);

}  // namespace gfm::mae
