#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gfm/mae/model.hpp"
#include "gfm/nn/optim.hpp"
#include "gfm/raster/band_stats.hpp"
#include "gfm/raster/types.hpp"
#include "gfm/store/chunk_store.hpp"

namespace gfm::mae {

struct PretrainConfig {
  std::size_t batch_size = 8;
  std::uint64_t steps = 200;
  double max_lr = 5e-4;
  double warmup_fraction = 0.1;
  nn::AdamWConfig adamw;
  std::uint64_t seed = 0;

  void validate() const;
  nn::LrSchedule schedule() const { return {max_lr, steps, warmup_fraction}; }
  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
};

// Standardized (T, C, H, W) float values of a chip.
std::vector<float> standardized_values(const raster::RasterChip& chip,
                                       const raster::BandStats& stats);

// Per-token regression targets [N, patch_size] (per-patch normalized when configured).
nn::Tensor<float> patch_targets(const MaeConfig& cfg, std::span<const float> input);

// Random plan used for sample `index` of pretraining step `step`.
MaskPlan pretrain_plan(const MaeConfig& cfg, std::uint64_t seed, std::uint64_t step,
                       std::size_t index);

// Forward, masked MSE, backward and one AdamW update at one_cycle_lr(schedule, step).
// Raises NumericError if the loss is not finite.
double pretrain_step(MaeModel<float>& model, std::span<const std::vector<float>> batch,
                     std::span<const MaskPlan> plans, const nn::LrSchedule& schedule,
                     std::uint64_t step, const nn::AdamWConfig& adamw);

// Masked MSE without any update.
double masked_loss(const MaeModel<float>& model, std::span<const std::vector<float>> batch,
                   std::span<const MaskPlan> plans);

struct PretrainLog {
  std::vector<double> losses;  // one per step
  std::vector<double> lrs;
};

// Trains from a chunk store for cfg.steps steps, cycling epochs as needed.
PretrainLog run_pretraining(MaeModel<float>& model, const store::ChunkStore& store,
                            const PretrainConfig& cfg, std::size_t workers,
                            const std::function<void(std::uint64_t, double)>& on_step = {});

// Input chip with masked tokens replaced by un-standardized predictions.
// Visible pixels are copied bit-exactly from the input. Returns an f32 chip.
raster::RasterChip reconstruct_image(const raster::RasterChip& chip, const MaskPlan& plan,
                                     const MaeModel<float>& model,
                                     const raster::BandStats& stats);

}  // namespace gfm::mae
