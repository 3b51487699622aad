#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gfm/raster/types.hpp"

namespace gfm::raster {

// Little-endian container: "GFMC", u16 version, u8 dtype, u32 T/C/H/W,
// length-prefixed band names and timestamps, origin block, f64 nodata,
// then the C-order payload.
inline constexpr std::uint16_t kChipFormatVersion = 1;

std::vector<std::byte> encode_chip(const RasterChip& chip);
RasterChip decode_chip(std::span<const std::byte> bytes);

void write_chip(const RasterChip& chip, const std::filesystem::path& path);
RasterChip read_chip(const std::filesystem::path& path);

// Quality masks use the same header with dtype 2 (u8), C = 1 and one
// timestep per mask. All masks must share dims and origin.
std::vector<std::byte> encode_quality_masks(std::span<const QualityMask> masks);
std::vector<QualityMask> decode_quality_masks(std::span<const std::byte> bytes);

void write_quality_masks(std::span<const QualityMask> masks, const std::filesystem::path& path);
std::vector<QualityMask> read_quality_masks(const std::filesystem::path& path);

}  // namespace gfm::raster
