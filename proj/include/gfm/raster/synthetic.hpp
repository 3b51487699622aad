#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gfm/raster/types.hpp"

namespace gfm::raster {

struct SyntheticScene {
  RasterChip chip;
  std::vector<QualityMask> quality;  // one per timestep
  std::vector<std::uint8_t> water;   // H x W land-cover map, 1 = water
};

// Smooth multi-octave landscape with correlated bands, water bodies,
// per-timestep drift, and ellipse clouds. Pure function of its arguments.
SyntheticScene generate_synthetic_scene(std::uint64_t seed, std::uint32_t size, std::uint32_t t,
                                        double cloud_fraction);

std::pair<RasterChip, std::vector<QualityMask>> generate_synthetic_tile(std::uint64_t seed,
                                                                        std::uint32_t size,
                                                                        std::uint32_t t,
                                                                        double cloud_fraction);

// Cloud/shadow masks alone, for imposing gaps on an otherwise clear chip.
QualityMask generate_cloud_mask(std::uint64_t seed, std::uint32_t size, double cloud_fraction,
                                const ChipOrigin& origin = {}, const std::string& timestamp = {});

// ISO-8601 date `days` after 2020-01-01.
std::string synthetic_date(int days);

TileId synthetic_tile_id(std::uint64_t seed);

}  // namespace gfm::raster
