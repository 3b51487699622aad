#include "gfm/finetune/gapfill.hpp"

#include <cmath>

#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/mae/pretrain.hpp"
#include "gfm/nn/losses.hpp"
#include "gfm/raster/synthetic.hpp"

namespace gfm::finetune {

std::size_t middle_timestep(const mae::MaeConfig& cfg) { return cfg.t / 2; }

nn::Tensor<float> gap_pixel_weights(const mae::MaeConfig& cfg,
                                    std::span<const raster::QualityMask> masks,
                                    std::size_t target_t) {
  if (masks.size() != cfg.t) {
    throw ShapeError("gap weights: " + std::to_string(masks.size()) + " masks for " +
                     std::to_string(cfg.t) + " timesteps");
  }
  const auto& m = masks[target_t];
  if (m.height != cfg.h || m.width != cfg.w) throw ShapeError("gap weights: mask size differs from input");
  const auto flags = mae::bad_pixel_flags(m);
  std::vector<float> dense(cfg.t * cfg.c * cfg.h * cfg.w, 0.0f);
  const std::size_t plane = cfg.h * cfg.w;
  for (std::size_t c = 0; c < cfg.c; ++c) {
    float* dst = dense.data() + (target_t * cfg.c + c) * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = flags[i] ? 1.0f : 0.0f;
  }
  return nn::patchify<float>(dense, cfg.geometry());
}

namespace {

struct Prepared {
  const GapSample* sample;
  mae::MaskPlan plan;
  nn::Tensor<float> weights;
};

std::vector<Prepared> prepare(const mae::MaeConfig& cfg, std::span<const GapSample> batch,
                              std::size_t& skipped) {
  std::vector<Prepared> out;
  const std::size_t mid = middle_timestep(cfg);
  for (const auto& s : batch) {
    try {
      auto plan = mae::make_mask_plan_from_quality(cfg.geometry(), s.masks, mid);
      out.push_back({&s, std::move(plan), gap_pixel_weights(cfg, s.masks, mid)});
    } catch (const EmptyInputError&) {
      ++skipped;
    }
  }
  return out;
}

}  // namespace

GapStepResult cloudgap_finetune_step(mae::MaeModel<float>& model, std::span<const GapSample> batch,
                                     double lr, const nn::AdamWConfig& adamw) {
  const auto& cfg = model.config();
  GapStepResult result;
  const auto prepared = prepare(cfg, batch, result.skipped);
  result.used = prepared.size();
  if (prepared.empty()) return result;

  model.params().zero_grad();
  std::vector<mae::MaeModel<float>::Cache> caches(prepared.size());
  std::vector<nn::Tensor<float>> preds, targets, weights;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    preds.push_back(model.forward(prepared[i].sample->input, prepared[i].plan, &caches[i]));
    targets.push_back(mae::patch_targets(cfg, prepared[i].sample->input));
    weights.push_back(prepared[i].weights);
  }
  const auto loss = nn::masked_rmse<float>(preds, targets, weights);
  if (!std::isfinite(loss.value)) throw NumericError("gap-fill loss is not finite");
  for (std::size_t i = 0; i < prepared.size(); ++i) model.backward(caches[i], loss.grads[i]);
  nn::adamw_step(model.params(), lr, adamw);
  result.loss = loss.value;
  return result;
}

double gap_rmse(const mae::MaeModel<float>& model, std::span<const GapSample> samples) {
  const auto& cfg = model.config();
  std::size_t skipped = 0;
  const auto prepared = prepare(cfg, samples, skipped);
  if (prepared.empty()) throw EmptyInputError("gap RMSE: no sample has a gap");
  std::vector<nn::Tensor<float>> preds, targets, weights;
  for (const auto& p : prepared) {
    preds.push_back(model.forward(p.sample->input, p.plan));
    targets.push_back(mae::patch_targets(cfg, p.sample->input));
    weights.push_back(p.weights);
  }
  return nn::masked_rmse<float>(preds, targets, weights).value;
}

raster::RasterChip infer_gapfill(const raster::RasterChip& chip,
                                 std::span<const raster::QualityMask> masks,
                                 const mae::MaeModel<float>& model, const raster::BandStats& stats) {
  const auto& cfg = model.config();
  const auto d = chip.dims();
  if (d.t != cfg.t || d.c != cfg.c || d.h != cfg.h || d.w != cfg.w) {
    throw ShapeError("gap-fill: chip " + nn::shape_str({d.t, d.c, d.h, d.w}) +
                     " does not match model input " + nn::shape_str({cfg.t, cfg.c, cfg.h, cfg.w}));
  }
  if (cfg.norm_pix_loss) throw ConfigError("gap-fill needs pixel-space targets (norm_pix_loss is set)");
  std::vector<float> out = chip.to_float();
  const std::size_t mid = middle_timestep(cfg);
  mae::MaskPlan plan;
  try {
    plan = mae::make_mask_plan_from_quality(cfg.geometry(), masks, mid);
  } catch (const EmptyInputError&) {
    return raster::RasterChip(d, std::move(out), chip.band_names(), chip.timestamps(), chip.origin(),
                              chip.nodata_value());
  }
  const auto input = mae::standardized_values(chip, stats);
  const auto pred = model.forward(input, plan);
  std::vector<float> full(out.size());
  nn::unpatchify_into<float>(pred, cfg.geometry(), {}, full);
  raster::unstandardize_values(full, d, stats);
  const auto flags = mae::bad_pixel_flags(masks[mid]);
  const std::size_t plane = std::size_t{d.h} * d.w;
  for (std::size_t c = 0; c < d.c; ++c) {
    const std::size_t base = (mid * d.c + c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (flags[i]) out[base + i] = full[base + i];
    }
  }
  return raster::RasterChip(d, std::move(out), chip.band_names(), chip.timestamps(), chip.origin(),
                            chip.nodata_value());
}

GapScenes make_gap_scenes(std::size_t count, std::uint32_t size, std::uint32_t timesteps,
                          double cloud_fraction, std::uint64_t seed) {
  GapScenes out;
  const std::uint32_t mid = timesteps / 2;
  for (std::size_t i = 0; i < count; ++i) {
    auto scene = raster::generate_synthetic_scene(derive_seed(seed, 0x474150, i), size, timesteps, 0.0);
    auto masks = scene.quality;
    masks[mid] = raster::generate_cloud_mask(derive_seed(seed, 0x434C44, i), size, cloud_fraction,
                                             masks[mid].origin, masks[mid].timestamp);
    out.chips.push_back(std::move(scene.chip));
    out.masks.push_back(std::move(masks));
  }
  return out;
}

std::vector<GapSample> standardize(const GapScenes& scenes, const raster::BandStats& stats) {
  std::vector<GapSample> out;
  for (std::size_t i = 0; i < scenes.chips.size(); ++i) {
    out.push_back({mae::standardized_values(scenes.chips[i], stats), scenes.masks[i]});
  }
  return out;
}

}  // namespace gfm::finetune
