#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gfm/mae/config.hpp"
#include "gfm/mae/mask_plan.hpp"
#include "gfm/nn/layers.hpp"
#include "gfm/nn/param_store.hpp"

namespace gfm::mae {

// Asymmetric masked autoencoder. Parameters are named "encoder.*",
// "decoder.*" and "mask_token", so encoder weights can be transplanted into
// downstream heads by prefix.
template <typename T>
class MaeModel {
 public:
  using Tensor = nn::Tensor<T>;
  using Block = nn::TransformerBlock<T>;

  struct EncoderCache {
    typename nn::Conv3d<T>::Cache embed;
    std::vector<typename Block::Cache> blocks;
    typename nn::LayerNorm<T>::Cache norm;
  };
  struct DecoderCache {
    typename nn::Linear<T>::Cache embed;
    std::vector<typename Block::Cache> blocks;
    typename nn::LayerNorm<T>::Cache norm;
    typename nn::Linear<T>::Cache pred;
    std::vector<std::size_t> visible;
    std::vector<std::size_t> masked;
  };
  struct Cache {
    EncoderCache enc;
    DecoderCache dec;
  };

  MaeModel(const MaeConfig& cfg, std::uint64_t seed);
  MaeModel(const MaeModel&) = delete;
  MaeModel& operator=(const MaeModel&) = delete;
  MaeModel(MaeModel&&) = default;
  MaeModel& operator=(MaeModel&&) = default;

  const MaeConfig& config() const { return cfg_; }
  nn::ParamStore<T>& params() { return *params_; }
  const nn::ParamStore<T>& params() const { return *params_; }

  // input: standardized (T, C, H, W) values; returns [tokens.size(), enc_dim].
  // An empty token list yields an empty latent.
  Tensor encode(std::span<const T> input, std::span<const std::size_t> tokens,
                EncoderCache* cache = nullptr) const;
  // Accumulates encoder gradients; returns d input when need_dx.
  std::vector<T> encode_backward(const EncoderCache& cache, const Tensor& dlatent,
                                 bool need_dx = false) const;

  // latent rows correspond to plan.visible (in that order); returns [N, patch_size].
  Tensor decode(const Tensor& latent, const MaskPlan& plan, DecoderCache* cache = nullptr) const;
  Tensor decode_backward(const DecoderCache& cache, const Tensor& dpred) const;

  Tensor forward(std::span<const T> input, const MaskPlan& plan, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Tensor& dpred) const;

 private:
  MaeConfig cfg_;
  std::unique_ptr<nn::ParamStore<T>> params_;
  nn::Conv3d<T> patch_embed_;
  std::vector<Block> enc_blocks_;
  nn::LayerNorm<T> enc_norm_;
  nn::Linear<T> dec_embed_;
  nn::Param<T>* mask_token_ = nullptr;
  std::vector<Block> dec_blocks_;
  nn::LayerNorm<T> dec_norm_;
  nn::Linear<T> dec_pred_;
  Tensor enc_pos_;  // [N, enc_dim]
  Tensor dec_pos_;  // [N, dec_dim]
};

}  // namespace gfm::mae
