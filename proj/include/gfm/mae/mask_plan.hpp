#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gfm/nn/layers.hpp"
#include "gfm/raster/types.hpp"

namespace gfm::mae {

enum class MaskOrigin { kRandom, kQuality, kNone };

// Partition of [0, total) into masked and visible tokens, both ascending.
struct MaskPlan {
  std::size_t total = 0;
  std::vector<std::size_t> masked;
  std::vector<std::size_t> visible;
  MaskOrigin origin = MaskOrigin::kNone;

  void validate() const;  // ShapeError when not a partition
};

MaskPlan make_mask_plan(std::size_t tokens, double ratio, std::uint64_t seed);

// Masks a target-timestep token iff its footprint holds any bad code.
// `masks` holds one quality mask per timestep of the grid's input.
MaskPlan make_mask_plan_from_quality(const nn::PatchGeometry& grid,
                                     std::span<const raster::QualityMask> masks,
                                     std::size_t target_t,
                                     std::span<const std::uint8_t> bad_codes = {});

// Every token visible; used for inference through the encoder alone.
MaskPlan visible_plan(std::size_t tokens);

// Per-pixel flags (1 = bad) for a quality mask under the given bad codes
// (defaults to cloud, shadow, adjacent, no-data).
std::vector<std::uint8_t> bad_pixel_flags(const raster::QualityMask& mask,
                                          std::span<const std::uint8_t> bad_codes = {});

}  // namespace gfm::mae
