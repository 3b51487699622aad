#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gfm/mae/model.hpp"
#include "gfm/nn/optim.hpp"
#include "gfm/raster/band_stats.hpp"
#include "gfm/raster/types.hpp"

namespace gfm::finetune {

// One training triplet: clear standardized input and the quality masks
// (one per timestep) whose bad pixels define the gaps.
struct GapSample {
  std::vector<float> input;
  std::vector<raster::QualityMask> masks;
};

std::size_t middle_timestep(const mae::MaeConfig& cfg);

// [N, patch_size] weights: 1 at bad pixels of the target timestep, else 0.
nn::Tensor<float> gap_pixel_weights(const mae::MaeConfig& cfg,
                                    std::span<const raster::QualityMask> masks,
                                    std::size_t target_t);

struct GapStepResult {
  std::optional<double> loss;  // empty when every sample was skipped
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Masks tokens touching bad pixels of the middle timestep, computes RMSE over
// the bad pixels and updates the whole autoencoder. Samples with a clear
// middle timestep are skipped.
GapStepResult cloudgap_finetune_step(mae::MaeModel<float>& model, std::span<const GapSample> batch,
                                     double lr, const nn::AdamWConfig& adamw);

// Masked-pixel RMSE (standardized units) over a set, without updating.
double gap_rmse(const mae::MaeModel<float>& model, std::span<const GapSample> samples);

// Replaces bad pixels of the middle timestep with un-standardized predictions;
// every other value passes through unchanged. Returns an f32 chip.
raster::RasterChip infer_gapfill(const raster::RasterChip& chip,
                                 std::span<const raster::QualityMask> masks,
                                 const mae::MaeModel<float>& model, const raster::BandStats& stats);

// Clear scenes paired with synthetic cloud masks on the middle timestep.
struct GapScenes {
  std::vector<raster::RasterChip> chips;
  std::vector<std::vector<raster::QualityMask>> masks;
};

GapScenes make_gap_scenes(std::size_t count, std::uint32_t size, std::uint32_t timesteps,
                          double cloud_fraction, std::uint64_t seed);
std::vector<GapSample> standardize(const GapScenes& scenes, const raster::BandStats& stats);

}  // namespace gfm::finetune
