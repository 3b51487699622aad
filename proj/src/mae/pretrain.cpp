#include "gfm/mae/pretrain.hpp"

#include <cmath>

#include "gfm/common/log.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/nn/losses.hpp"
#include "gfm/store/batch_loader.hpp"

namespace gfm::mae {

void PretrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (steps == 0) throw ConfigError("train: steps must be positive");
  if (!(adamw.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  schedule().validate();
}

nlohmann::json PretrainConfig::to_json() const {
  return {{"batch_size", batch_size},   {"steps", steps},
          {"max_lr", max_lr},           {"warmup_fraction", warmup_fraction},
          {"beta1", adamw.beta1},       {"beta2", adamw.beta2},
          {"eps", adamw.eps},           {"weight_decay", adamw.weight_decay},
          {"seed", seed}};
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j) {
  PretrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.max_lr = j.value("max_lr", c.max_lr);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.adamw.beta1 = j.value("beta1", c.adamw.beta1);
    c.adamw.beta2 = j.value("beta2", c.adamw.beta2);
    c.adamw.eps = j.value("eps", c.adamw.eps);
    c.adamw.weight_decay = j.value("weight_decay", c.adamw.weight_decay);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<float> standardized_values(const raster::RasterChip& chip,
                                       const raster::BandStats& stats) {
  auto values = chip.to_float();
  raster::standardize_values(values, chip.dims(), stats);
  return values;
}

nn::Tensor<float> patch_targets(const MaeConfig& cfg, std::span<const float> input) {
  auto t = nn::patchify<float>(input, cfg.geometry());
  if (cfg.norm_pix_loss) {
    const std::size_t p = t.cols();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto row = t.row(r);
      double mean = 0.0, var = 0.0;
      for (float v : row) mean += v;
      mean /= static_cast<double>(p);
      for (float v : row) var += (v - mean) * (v - mean);
      var /= static_cast<double>(p);
      const double inv = 1.0 / std::sqrt(var + 1e-6);
      for (auto& v : row) v = static_cast<float>((v - mean) * inv);
    }
  }
  return t;
}

MaskPlan pretrain_plan(const MaeConfig& cfg, std::uint64_t seed, std::uint64_t step,
                       std::size_t index) {
  return make_mask_plan(cfg.tokens(), cfg.mask_ratio, derive_seed(seed, 0x504C414E, step, index));
}

namespace {

void check_batch(std::span<const std::vector<float>> batch, std::span<const MaskPlan> plans) {
  if (batch.empty()) throw EmptyInputError("pretraining batch is empty");
  if (batch.size() != plans.size()) {
    throw ShapeError("pretraining batch has " + std::to_string(batch.size()) + " samples but " +
                     std::to_string(plans.size()) + " mask plans");
  }
}

struct Forward {
  std::vector<nn::Tensor<float>> preds, targets;
  std::vector<std::vector<std::size_t>> masked;
  std::vector<MaeModel<float>::Cache> caches;
};

Forward run_forward(const MaeModel<float>& model, std::span<const std::vector<float>> batch,
                    std::span<const MaskPlan> plans, bool keep_cache) {
  Forward f;
  if (keep_cache) f.caches.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    f.preds.push_back(model.forward(batch[i], plans[i], keep_cache ? &f.caches[i] : nullptr));
    f.targets.push_back(patch_targets(model.config(), batch[i]));
    f.masked.push_back(plans[i].masked);
  }
  return f;
}

}  // namespace

double pretrain_step(MaeModel<float>& model, std::span<const std::vector<float>> batch,
                     std::span<const MaskPlan> plans, const nn::LrSchedule& schedule,
                     std::uint64_t step, const nn::AdamWConfig& adamw) {
  check_batch(batch, plans);
  model.params().zero_grad();
  Forward f = run_forward(model, batch, plans, true);
  auto loss = nn::masked_mse<float>(f.preds, f.targets, f.masked);
  if (!std::isfinite(loss.value)) {
    throw NumericError("pretraining loss is not finite at step " + std::to_string(step));
  }
  for (std::size_t i = 0; i < batch.size(); ++i) model.backward(f.caches[i], loss.grads[i]);
  nn::adamw_step(model.params(), nn::one_cycle_lr(schedule, step), adamw);
  return loss.value;
}

double masked_loss(const MaeModel<float>& model, std::span<const std::vector<float>> batch,
                   std::span<const MaskPlan> plans) {
  check_batch(batch, plans);
  Forward f = run_forward(model, batch, plans, false);
  return nn::masked_mse<float>(f.preds, f.targets, f.masked).value;
}

PretrainLog run_pretraining(MaeModel<float>& model, const store::ChunkStore& store,
                            const PretrainConfig& cfg, std::size_t workers,
                            const std::function<void(std::uint64_t, double)>& on_step) {
  cfg.validate();
  const auto& manifest = store.manifest();
  const auto& mc = model.config();
  const auto& ss = manifest.sample_shape;
  if (ss.t != mc.t || ss.c != mc.c || ss.h != mc.h || ss.w != mc.w) {
    throw CompatibilityError("store samples do not match the model input shape");
  }
  const auto schedule = cfg.schedule();
  PretrainLog log;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; step < cfg.steps; ++epoch) {
    store::LoaderConfig lc;
    lc.batch_size = std::min(cfg.batch_size, store.size());
    lc.workers = workers;
    lc.seed = cfg.seed;
    store::BatchIterator it(store, lc, epoch);
    while (step < cfg.steps) {
      auto batch = it.next();
      if (!batch) break;
      std::vector<std::vector<float>> inputs;
      std::vector<MaskPlan> plans;
      for (std::size_t i = 0; i < batch->samples.size(); ++i) {
        inputs.push_back(standardized_values(batch->samples[i], manifest.band_stats));
        plans.push_back(pretrain_plan(mc, cfg.seed, step, i));
      }
      const double lr = nn::one_cycle_lr(schedule, step);
      const double loss = pretrain_step(model, inputs, plans, schedule, step, cfg.adamw);
      log.losses.push_back(loss);
      log.lrs.push_back(lr);
      gfm::log::debug("pretrain_step", {{"step", step}, {"loss", loss}, {"lr", lr}});
      if (on_step) on_step(step, loss);
      ++step;
    }
  }
  return log;
}

raster::RasterChip reconstruct_image(const raster::RasterChip& chip, const MaskPlan& plan,
                                     const MaeModel<float>& model,
                                     const raster::BandStats& stats) {
  const auto& cfg = model.config();
  if (cfg.norm_pix_loss) {
    throw ConfigError("reconstruction needs pixel-space targets (norm_pix_loss is set)");
  }
  const auto d = chip.dims();
  if (d.t != cfg.t || d.c != cfg.c || d.h != cfg.h || d.w != cfg.w) {
    throw ShapeError("reconstruct: chip does not match model input");
  }
  std::vector<float> out = chip.to_float();
  if (!plan.masked.empty()) {
    auto input = standardized_values(chip, stats);
    auto pred = model.forward(input, plan);
    std::vector<float> full(out.size());
    nn::unpatchify_into<float>(pred, cfg.geometry(), {}, full);
    raster::unstandardize_values(full, d, stats);
    auto rows = nn::patchify<float>(full, cfg.geometry(), plan.masked);
    nn::unpatchify_into<float>(rows, cfg.geometry(), plan.masked, out);
  }
  return raster::RasterChip(d, std::move(out), chip.band_names(), chip.timestamps(),
                            chip.origin(), chip.nodata_value());
}

}  // namespace gfm::mae
