#pragma once

#include <cstdint>
#include <vector>

#include "gfm/finetune/gapfill.hpp"
#include "gfm/finetune/seg_model.hpp"
#include "gfm/mae/mask_plan.hpp"
#include "gfm/mae/model.hpp"
#include "gfm/mae/pretrain.hpp"
#include "gfm/nn/losses.hpp"
#include "gfm/raster/synthetic.hpp"
#include "support/grad_cases_nn.hpp"
#include "support/grad_harness.hpp"

// Finite-difference instances for the autoencoder and the fine-tuning models.
// Large parameter sets are spot-checked at a few random coordinates each.
namespace gfm::testing::grad {

// T=2, 8x8 input, 4x4 patches, dim 16.
inline mae::MaeConfig mae_grad_config() {
  mae::MaeConfig cfg;
  cfg.t = 2;
  cfg.c = 2;
  cfg.h = cfg.w = 8;
  cfg.ph = cfg.pw = 4;
  cfg.enc_dim = 16;
  cfg.enc_depth = 1;
  cfg.enc_heads = 2;
  cfg.dec_dim = 16;
  cfg.dec_depth = 1;
  cfg.dec_heads = 2;
  cfg.mlp_ratio = 2;
  return cfg;
}

// Two 16 px patches per timestep, as the segmentation neck requires.
inline mae::MaeConfig seg_grad_backbone() {
  mae::MaeConfig cfg;
  cfg.t = 2;
  cfg.c = 2;
  cfg.h = 32;
  cfg.w = 16;
  cfg.enc_dim = 16;
  cfg.enc_depth = 1;
  cfg.enc_heads = 2;
  cfg.dec_dim = 16;
  cfg.dec_depth = 1;
  cfg.dec_heads = 1;
  cfg.mlp_ratio = 1;
  return cfg;
}

inline std::vector<std::uint8_t> random_label_map(Rng& rng, std::size_t n, std::size_t k, double ignore_p) {
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = rng.uniform() < ignore_p ? 255 : static_cast<std::uint8_t>(rng.uniform_int(k));
  return v;
}

inline std::vector<GradTarget> trainable_targets(nn::ParamStore<double>& store, const char* prefix = "") {
  std::vector<GradTarget> targets;
  for (auto& [name, p] : store.entries()) {
    if (!p.trainable || name.rfind(prefix, 0) != 0) continue;
    targets.push_back({name, p.value.values(), std::vector<double>(p.grad.values().begin(), p.grad.values().end())});
  }
  return targets;
}

inline GradReport grad_mae_end_to_end(std::uint64_t seed) {
  const auto cfg = mae_grad_config();
  mae::MaeModel<double> model(cfg, seed);
  Rng rng(seed + 100);
  randomize(model.params(), rng, 0.3);
  auto input = random_values(rng, cfg.t * cfg.c * cfg.h * cfg.w);
  nn::Tensor<double> target({cfg.tokens(), cfg.patch_size()}, random_values(rng, cfg.tokens() * cfg.patch_size()));
  const auto plan = mae::make_mask_plan(cfg.tokens(), 0.5, seed);
  const std::vector<std::vector<std::size_t>> rows{plan.masked};
  auto loss = [&] {
    const auto pred = model.forward(input, plan);
    return nn::masked_mse<double>({&pred, 1}, {&target, 1}, rows).value;
  };
  model.params().zero_grad();
  mae::MaeModel<double>::Cache cache;
  const auto pred = model.forward(input, plan, &cache);
  const auto res = nn::masked_mse<double>({&pred, 1}, {&target, 1}, rows);
  model.backward(cache, res.grads[0]);
  std::vector<GradTarget> targets;
  add_param_targets(model.params(), targets);
  return check_gradients(loss, targets, 6, seed);
}

inline GradReport grad_mae_encoder_input(std::uint64_t seed) {
  const auto cfg = mae_grad_config();
  mae::MaeModel<double> model(cfg, seed);
  Rng rng(seed + 300);
  randomize(model.params(), rng, 0.3);
  auto input = random_values(rng, cfg.t * cfg.c * cfg.h * cfg.w);
  const auto plan = mae::make_mask_plan(cfg.tokens(), 0.5, seed + 1);
  const auto weights = random_values(rng, plan.visible.size() * cfg.enc_dim);
  auto loss = [&] { return project(model.encode(input, plan.visible).values(), weights); };
  mae::MaeModel<double>::EncoderCache cache;
  const auto z = model.encode(input, plan.visible, &cache);
  const auto dx = model.encode_backward(cache, nn::Tensor<double>(z.shape(), weights), true);
  std::vector<GradTarget> targets{{"input", input, dx}};
  return check_gradients(loss, targets, 12, seed);
}

inline GradReport grad_seg_cross_entropy(std::uint64_t seed) {
  const auto cfg = seg_grad_backbone();
  finetune::SegHeadConfig head;
  head.classes = 3;
  head.neck = {4, 3, 3, 2};
  finetune::SegModel<double> model(cfg, head, seed);
  Rng rng(seed + 7);
  randomize(model.params(), rng, 0.3);
  // A weak neck attenuates encoder gradients into finite-difference roundoff.
  for (auto& [name, p] : model.params().entries()) {
    if (name.rfind("head.", 0) == 0) {
      for (auto& v : p.value.values()) v *= 3.0;
    }
  }
  const auto input = random_values(rng, cfg.t * cfg.c * cfg.h * cfg.w);
  const std::vector<std::vector<std::uint8_t>> labels{random_label_map(rng, cfg.h * cfg.w, 3, 0.1)};
  const std::vector<double> weights{0.5, 1.0, 1.5};
  auto loss = [&] {
    const auto logits = model.forward(input);
    return nn::weighted_cross_entropy<double>({&logits, 1}, labels, weights).value;
  };
  model.params().zero_grad();
  finetune::SegModel<double>::Cache cache;
  const auto logits = model.forward(input, &cache);
  model.backward(cache, nn::weighted_cross_entropy<double>({&logits, 1}, labels, weights).grads[0]);
  auto targets = trainable_targets(model.params());
  return check_gradients(loss, targets, 4, seed);
}

inline GradReport grad_seg_dice(std::uint64_t seed) {
  const auto cfg = seg_grad_backbone();
  finetune::SegHeadConfig head;
  head.neck = {3, 3, 2, 2};
  finetune::SegModel<double> model(cfg, head, seed);
  Rng rng(seed + 70);
  randomize(model.params(), rng, 0.3);
  model.set_encoder_trainable(false);
  const auto input = random_values(rng, cfg.t * cfg.c * cfg.h * cfg.w);
  const std::vector<std::vector<std::uint8_t>> labels{random_label_map(rng, cfg.h * cfg.w, 2, 0.1)};
  auto loss = [&] {
    const auto logits = model.forward(input);
    return nn::dice_loss<double>({&logits, 1}, labels).value;
  };
  model.params().zero_grad();
  finetune::SegModel<double>::Cache cache;
  const auto logits = model.forward(input, &cache);
  model.backward(cache, nn::dice_loss<double>({&logits, 1}, labels).grads[0]);
  auto targets = trainable_targets(model.params(), "head.");
  return check_gradients(loss, targets, 6, seed);
}

// Cloud-derived plan, RMSE over bad pixels of the middle timestep.
inline GradReport grad_gapfill_rmse(std::uint64_t seed) {
  auto cfg = mae_grad_config();
  cfg.t = 3;
  mae::MaeModel<double> model(cfg, seed);
  Rng rng(seed + 500);
  randomize(model.params(), rng, 0.3);
  auto input = random_values(rng, cfg.t * cfg.c * cfg.h * cfg.w);
  std::vector<raster::QualityMask> masks(cfg.t);
  for (auto& m : masks) {
    m.height = static_cast<std::uint32_t>(cfg.h);
    m.width = static_cast<std::uint32_t>(cfg.w);
    m.codes.assign(cfg.h * cfg.w, raster::kClear);
  }
  const std::size_t mid = finetune::middle_timestep(cfg);
  for (auto& c : masks[mid].codes) c = rng.uniform() < 0.3 ? raster::kCloud : raster::kClear;
  masks[mid].codes[0] = raster::kCloud;
  const auto plan = mae::make_mask_plan_from_quality(cfg.geometry(), masks, mid);
  const auto w = finetune::gap_pixel_weights(cfg, masks, mid).cast<double>();
  auto target = mae::patch_targets(cfg, std::vector<float>(input.begin(), input.end())).cast<double>();
  auto loss = [&] {
    const auto pred = model.forward(input, plan);
    return nn::masked_rmse<double>({&pred, 1}, {&target, 1}, {&w, 1}).value;
  };
  model.params().zero_grad();
  mae::MaeModel<double>::Cache cache;
  const auto pred = model.forward(input, plan, &cache);
  model.backward(cache, nn::masked_rmse<double>({&pred, 1}, {&target, 1}, {&w, 1}).grads[0]);
  std::vector<GradTarget> targets;
  add_param_targets(model.params(), targets);
  return check_gradients(loss, targets, 6, seed);
}

inline const std::vector<Case>& model_cases() {
  static const std::vector<Case> kCases{
      {"mae_end_to_end", grad_mae_end_to_end},
      {"mae_encoder_input", grad_mae_encoder_input},
      {"seg_cross_entropy", grad_seg_cross_entropy},
      {"seg_dice", grad_seg_dice},
      {"gapfill_rmse", grad_gapfill_rmse},
  };
  return kCases;
}

}  // namespace gfm::testing::grad
