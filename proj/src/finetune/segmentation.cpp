#include "gfm/finetune/segmentation.hpp"

#include <cmath>
#include <numeric>

#include "gfm/common/error.hpp"
#include "gfm/common/log.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/mae/pretrain.hpp"
#include "gfm/nn/losses.hpp"
#include "gfm/raster/synthetic.hpp"

namespace gfm::finetune {

SegData SegData::subset(std::span<const std::size_t> indices) const {
  SegData out;
  for (auto i : indices) {
    if (i >= size()) throw IndexError("segmentation sample " + std::to_string(i) + " out of range");
    out.inputs.push_back(inputs[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

WaterScenes make_water_scenes(std::size_t count, std::uint32_t size, std::uint32_t timesteps,
                              std::uint64_t seed) {
  WaterScenes out;
  for (std::size_t i = 0; i < count; ++i) {
    auto scene = raster::generate_synthetic_scene(derive_seed(seed, 0x5741, i), size, timesteps, 0.0);
    out.chips.push_back(std::move(scene.chip));
    out.labels.push_back(std::move(scene.water));
  }
  return out;
}

SegData standardize(const WaterScenes& scenes, const raster::BandStats& stats) {
  SegData out;
  for (const auto& c : scenes.chips) out.inputs.push_back(mae::standardized_values(c, stats));
  out.labels = scenes.labels;
  return out;
}

std::vector<double> inverse_frequency_weights(std::span<const std::vector<std::uint8_t>> labels,
                                              std::size_t classes, int ignore_label) {
  std::vector<double> counts(classes, 0.0);
  for (const auto& map : labels) {
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (static_cast<int>(map[i]) == ignore_label) continue;
      if (map[i] >= classes) {
        throw LabelError("label " + std::to_string(map[i]) + " at position " + std::to_string(i) +
                         " exceeds " + std::to_string(classes) + " classes");
      }
      counts[map[i]] += 1.0;
    }
  }
  std::vector<double> w(classes, 0.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] > 0.0) {
      w[c] = 1.0 / counts[c];
      sum += w[c];
      ++present;
    }
  }
  if (present == 0) throw DegenerateInputError("class weights: every pixel is ignored");
  const double mean = sum / static_cast<double>(classes);
  for (auto& v : w) v /= mean;
  return w;
}

nn::LossResult<float> seg_loss(const SegHeadConfig& cfg, std::span<const nn::Tensor<float>> logits,
                               std::span<const std::vector<std::uint8_t>> labels) {
  if (cfg.loss == SegLoss::kDice) return nn::dice_loss<float>(logits, labels, cfg.ignore_label);
  return nn::weighted_cross_entropy<float>(logits, labels, cfg.class_weights, cfg.ignore_label);
}

double finetune_seg_step(SegModel<float>& model, std::span<const std::vector<float>> inputs,
                         std::span<const std::vector<std::uint8_t>> labels, double lr,
                         const nn::AdamWConfig& adamw) {
  if (inputs.size() != labels.size() || inputs.empty()) {
    throw ShapeError("finetune step: need matching, non-empty inputs and labels");
  }
  model.params().zero_grad();
  std::vector<SegModel<float>::Cache> caches(inputs.size());
  std::vector<nn::Tensor<float>> logits;
  for (std::size_t i = 0; i < inputs.size(); ++i) logits.push_back(model.forward(inputs[i], &caches[i]));
  const auto loss = seg_loss(model.head_config(), logits, labels);
  if (!std::isfinite(loss.value)) throw NumericError("fine-tuning loss is not finite");
  for (std::size_t i = 0; i < inputs.size(); ++i) model.backward(caches[i], loss.grads[i]);
  nn::adamw_step(model.params(), lr, adamw);
  return loss.value;
}

std::vector<std::uint8_t> argmax_labels(const nn::Tensor<float>& logits) {
  if (logits.rank() != 3) throw ShapeError("argmax expects [K, H, W] logits, got " + nn::shape_str(logits.shape()));
  const std::size_t k = logits.dim(0), plane = logits.dim(1) * logits.dim(2);
  std::vector<std::uint8_t> out(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    float best = logits.data()[p];
    for (std::size_t c = 1; c < k; ++c) {
      const float v = logits.data()[c * plane + p];
      if (v > best) {
        best = v;
        out[p] = static_cast<std::uint8_t>(c);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> infer_seg(const SegModel<float>& model, std::span<const float> input) {
  return argmax_labels(model.forward(input));
}

metrics::ConfusionMatrix evaluate_seg(const SegModel<float>& model, const SegData& data) {
  metrics::ConfusionMatrix cm(model.head_config().classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    cm.accumulate(infer_seg(model, data.inputs[i]), data.labels[i], model.head_config().ignore_label);
  }
  return cm;
}

void SegTrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("finetune config: /epochs must be positive");
  if (batch_size == 0) throw ConfigError("finetune config: /batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("finetune config: /lr must be positive");
}

nlohmann::json SegTrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"weight_decay", adamw.weight_decay},
          {"seed", seed}};
}

SegTrainConfig SegTrainConfig::from_json(const nlohmann::json& j) {
  SegTrainConfig cfg;
  try {
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.adamw.weight_decay = j.value("weight_decay", cfg.adamw.weight_decay);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("finetune config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<EpochRecord> train_segmentation(SegModel<float>& model, const SegData& train,
                                            const SegData& val, const SegTrainConfig& cfg,
                                            const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train.size() == 0) throw EmptyInputError("fine-tuning needs at least one training sample");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x45504F43, epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<float>> inputs;
      std::vector<std::vector<std::uint8_t>> labels;
      for (std::size_t i = start; i < end; ++i) {
        inputs.push_back(train.inputs[order[i]]);
        labels.push_back(train.labels[order[i]]);
      }
      loss_sum += finetune_seg_step(model, inputs, labels, cfg.lr, cfg.adamw);
      ++batches;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), 0.0};
    if (val.size() > 0) rec.val_miou = metrics::summarize(evaluate_seg(model, val)).miou;
    gfm::log::debug("finetune_epoch",
                    {{"epoch", epoch}, {"loss", rec.train_loss}, {"val_miou", rec.val_miou}});
    if (on_epoch) on_epoch(rec);
    history.push_back(rec);
  }
  return history;
}

}  // namespace gfm::finetune
