#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gfm/finetune/seg_model.hpp"
#include "gfm/metrics/metrics.hpp"
#include "gfm/nn/losses.hpp"
#include "gfm/nn/optim.hpp"
#include "gfm/raster/band_stats.hpp"
#include "gfm/raster/types.hpp"

namespace gfm::finetune {

// Standardized inputs with one u8 label map (H x W) per sample.
struct SegData {
  std::vector<std::vector<float>> inputs;
  std::vector<std::vector<std::uint8_t>> labels;

  std::size_t size() const { return inputs.size(); }
  SegData subset(std::span<const std::size_t> indices) const;
};

// Synthetic water/land scenes: chips plus the static water map as labels.
struct WaterScenes {
  std::vector<raster::RasterChip> chips;
  std::vector<std::vector<std::uint8_t>> labels;
};

WaterScenes make_water_scenes(std::size_t count, std::uint32_t size, std::uint32_t timesteps,
                              std::uint64_t seed);
SegData standardize(const WaterScenes& scenes, const raster::BandStats& stats);

// Inverse class frequency over non-ignored pixels, normalized to mean 1.
// Classes absent from the labels get weight 0.
std::vector<double> inverse_frequency_weights(std::span<const std::vector<std::uint8_t>> labels,
                                              std::size_t classes, int ignore_label = 255);

// Loss from the head config (weighted CE or dice) on a batch of logits.
nn::LossResult<float> seg_loss(const SegHeadConfig& cfg, std::span<const nn::Tensor<float>> logits,
                               std::span<const std::vector<std::uint8_t>> labels);

// One optimizer step; only trainable parameters (per regime) are updated.
double finetune_seg_step(SegModel<float>& model, std::span<const std::vector<float>> inputs,
                         std::span<const std::vector<std::uint8_t>> labels, double lr,
                         const nn::AdamWConfig& adamw);

// Per-pixel argmax of [K, H, W] logits; ties go to the lowest class index.
std::vector<std::uint8_t> argmax_labels(const nn::Tensor<float>& logits);
std::vector<std::uint8_t> infer_seg(const SegModel<float>& model, std::span<const float> input);

metrics::ConfusionMatrix evaluate_seg(const SegModel<float>& model, const SegData& data);

struct SegTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  nn::AdamWConfig adamw;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SegTrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_miou = 0.0;
};

// Shuffled mini-batch fine-tuning at a constant learning rate; evaluates on
// `val` after every epoch.
std::vector<EpochRecord> train_segmentation(SegModel<float>& model, const SegData& train,
                                            const SegData& val, const SegTrainConfig& cfg,
                                            const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace gfm::finetune
