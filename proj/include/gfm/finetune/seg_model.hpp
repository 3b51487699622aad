#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfm/mae/model.hpp"
#include "gfm/nn/checkpoint.hpp"
#include "gfm/nn/layers.hpp"

namespace gfm::finetune {

enum class SegLoss { kWeightedCe, kDice };

struct SegHeadConfig {
  std::size_t classes = 2;
  std::array<std::size_t, 4> neck{512, 256, 128, 64};
  SegLoss loss = SegLoss::kWeightedCe;
  std::vector<double> class_weights;  // empty = uniform
  int ignore_label = 255;

  void validate() const;  // ConfigError
  nlohmann::json to_json() const;
  static SegHeadConfig from_json(const nlohmann::json& j);
};

// Four stride-2 transposed convolutions with GELU, then a pointwise classifier.
// Maps [C, h, w] features to [K, 16h, 16w] logits.
template <typename T>
class SegHead {
 public:
  struct Cache {
    std::array<typename nn::TransposeConv2d<T>::Cache, 4> up;
    std::array<nn::Tensor<T>, 4> pre;  // stage outputs before GELU
    typename nn::Conv1x1<T>::Cache cls;
  };

  SegHead() = default;
  SegHead(nn::ParamStore<T>& store, const std::string& name, std::size_t in_channels,
          const SegHeadConfig& cfg, Rng& rng);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, Cache* cache = nullptr) const;
  nn::Tensor<T> backward(const Cache& cache, const nn::Tensor<T>& dlogits) const;

 private:
  std::array<nn::TransposeConv2d<T>, 4> up_;
  nn::Conv1x1<T> cls_;
};

enum class EncoderInit { kPretrained, kRandom };

struct FinetuneRegime {
  EncoderInit init = EncoderInit::kPretrained;
  bool encoder_trainable = true;

  void validate() const;  // frozen requires pretrained
  std::string name() const;
  static FinetuneRegime parse(const std::string& name);  // pretrained | random | frozen
};

// Encoder of a masked autoencoder plus a segmentation head. Head parameters
// live in the backbone store under "head."; decoder parameters are frozen.
template <typename T>
class SegModel {
 public:
  struct Cache {
    typename mae::MaeModel<T>::EncoderCache enc;
    typename SegHead<T>::Cache head;
  };

  SegModel(const mae::MaeConfig& mae_cfg, const SegHeadConfig& head_cfg, std::uint64_t seed);

  const mae::MaeConfig& mae_config() const { return backbone_.config(); }
  const SegHeadConfig& head_config() const { return head_cfg_; }
  nn::ParamStore<T>& params() { return backbone_.params(); }
  const nn::ParamStore<T>& params() const { return backbone_.params(); }
  mae::MaeModel<T>& backbone() { return backbone_; }

  // Marks encoder parameters trainable or not; decoder stays frozen.
  void set_encoder_trainable(bool trainable);
  bool encoder_trainable() const { return encoder_trainable_; }

  // input: standardized (T, C, H, W); returns [K, H, W] logits.
  nn::Tensor<T> forward(std::span<const T> input, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const nn::Tensor<T>& dlogits) const;

 private:
  SegHeadConfig head_cfg_;
  mae::MaeModel<T> backbone_;
  SegHead<T> head_;
  std::vector<std::size_t> all_tokens_;
  bool encoder_trainable_ = true;
};

// Copies "encoder.*" weights from a pretraining checkpoint and applies the regime's
// trainability. Shape mismatches raise CompatibilityError.
void apply_regime(SegModel<float>& model, const FinetuneRegime& regime,
                  const nn::Checkpoint* pretrained);

// Channels = grid_t * D, timesteps concatenated along channels.
std::size_t neck_input_channels(const mae::MaeConfig& cfg);

}  // namespace gfm::finetune
