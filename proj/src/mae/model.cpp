#include "gfm/mae/model.hpp"

#include <algorithm>
#include <cstring>

#include "gfm/common/rng.hpp"
#include "gfm/mae/posenc.hpp"

namespace gfm::mae {

namespace {

template <typename T>
nn::Tensor<T> posenc_table(const MaeConfig& cfg, std::size_t dim) {
  const auto g = cfg.geometry();
  return posenc_3d(g.grid_t(), g.grid_h(), g.grid_w(), dim).template cast<T>();
}

}  // namespace

template <typename T>
MaeModel<T>::MaeModel(const MaeConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), params_(std::make_unique<nn::ParamStore<T>>()) {
  cfg_.validate();
  auto& store = *params_;
  Rng rng(derive_seed(seed, 0x4D4145));
  patch_embed_ =
      nn::Conv3d<T>(store, "encoder.patch_embed", cfg.c, cfg.pt, cfg.ph, cfg.pw, cfg.enc_dim, rng);
  for (std::size_t i = 0; i < cfg.enc_depth; ++i) {
    enc_blocks_.emplace_back(store, "encoder.blocks." + std::to_string(i), cfg.enc_dim,
                             cfg.enc_heads, cfg.mlp_ratio, rng);
  }
  enc_norm_ = nn::LayerNorm<T>(store, "encoder.norm", cfg.enc_dim);
  dec_embed_ = nn::Linear<T>(store, "decoder.embed", cfg.enc_dim, cfg.dec_dim, rng);
  mask_token_ = &store.add("decoder.mask_token", {cfg.dec_dim}, false);
  nn::init_trunc_normal(mask_token_->value, rng);
  for (std::size_t i = 0; i < cfg.dec_depth; ++i) {
    dec_blocks_.emplace_back(store, "decoder.blocks." + std::to_string(i), cfg.dec_dim,
                             cfg.dec_heads, cfg.mlp_ratio, rng);
  }
  dec_norm_ = nn::LayerNorm<T>(store, "decoder.norm", cfg.dec_dim);
  dec_pred_ = nn::Linear<T>(store, "decoder.pred", cfg.dec_dim, cfg.patch_size(), rng);
  enc_pos_ = posenc_table<T>(cfg_, cfg.enc_dim);
  dec_pos_ = posenc_table<T>(cfg_, cfg.dec_dim);
}

template <typename T>
nn::Tensor<T> MaeModel<T>::encode(std::span<const T> input, std::span<const std::size_t> tokens,
                                  EncoderCache* cache) const {
  const auto g = cfg_.geometry();
  const std::size_t d = cfg_.enc_dim;
  Tensor x({0, d});
  if (!tokens.empty()) {
    x = patch_embed_.forward(input, g, tokens, cache ? &cache->embed : nullptr);
  } else if (cache) {
    // Everything masked: an empty sequence still flows through the blocks.
    cache->embed = {};
    cache->embed.lin.x = Tensor({0, g.patch_size()});
    cache->embed.geometry = g;
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T* pos = enc_pos_.data() + tokens[r] * d;
    T* row = x.data() + r * d;
    for (std::size_t k = 0; k < d; ++k) row[k] += pos[k];
  }
  if (cache) cache->blocks.resize(enc_blocks_.size());
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
    x = enc_blocks_[i].forward(x, cache ? &cache->blocks[i] : nullptr);
  }
  return enc_norm_.forward(x, cache ? &cache->norm : nullptr);
}

template <typename T>
std::vector<T> MaeModel<T>::encode_backward(const EncoderCache& cache, const Tensor& dlatent,
                                            bool need_dx) const {
  Tensor dx = enc_norm_.backward(cache.norm, dlatent);
  for (std::size_t i = enc_blocks_.size(); i-- > 0;) dx = enc_blocks_[i].backward(cache.blocks[i], dx);
  return patch_embed_.backward(cache.embed, dx, need_dx);
}

template <typename T>
nn::Tensor<T> MaeModel<T>::decode(const Tensor& latent, const MaskPlan& plan,
                                  DecoderCache* cache) const {
  const std::size_t n = cfg_.tokens();
  if (plan.total != n) {
    throw ShapeError("decode: plan covers " + std::to_string(plan.total) + " tokens, model has " +
                     std::to_string(n));
  }
  if (latent.rank() != 2 || latent.rows() != plan.visible.size()) {
    throw ShapeError("decode: latent " + nn::shape_str(latent.shape()) + " vs " +
                     std::to_string(plan.visible.size()) + " visible tokens");
  }
  const std::size_t d = cfg_.dec_dim;
  Tensor y = dec_embed_.forward(latent, cache ? &cache->embed : nullptr);
  Tensor full({n, d});
  for (std::size_t r = 0; r < plan.visible.size(); ++r) {
    std::memcpy(full.data() + plan.visible[r] * d, y.data() + r * d, sizeof(T) * d);
  }
  for (auto m : plan.masked) {
    std::memcpy(full.data() + m * d, mask_token_->value.data(), sizeof(T) * d);
  }
  full += dec_pos_;
  if (cache) cache->blocks.resize(dec_blocks_.size());
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    full = dec_blocks_[i].forward(full, cache ? &cache->blocks[i] : nullptr);
  }
  Tensor out = dec_pred_.forward(dec_norm_.forward(full, cache ? &cache->norm : nullptr),
                                 cache ? &cache->pred : nullptr);
  if (cache) {
    cache->visible = plan.visible;
    cache->masked = plan.masked;
  }
  return out;
}

template <typename T>
nn::Tensor<T> MaeModel<T>::decode_backward(const DecoderCache& cache, const Tensor& dpred) const {
  const std::size_t d = cfg_.dec_dim;
  Tensor dfull = dec_norm_.backward(cache.norm, dec_pred_.backward(cache.pred, dpred));
  for (std::size_t i = dec_blocks_.size(); i-- > 0;) {
    dfull = dec_blocks_[i].backward(cache.blocks[i], dfull);
  }
  nn::ensure_grad(*mask_token_);
  T* dm = mask_token_->grad.data();
  for (auto m : cache.masked) {
    const T* row = dfull.data() + m * d;
    for (std::size_t k = 0; k < d; ++k) dm[k] += row[k];
  }
  Tensor dy({cache.visible.size(), d});
  for (std::size_t r = 0; r < cache.visible.size(); ++r) {
    std::memcpy(dy.data() + r * d, dfull.data() + cache.visible[r] * d, sizeof(T) * d);
  }
  return dec_embed_.backward(cache.embed, dy);
}

template <typename T>
nn::Tensor<T> MaeModel<T>::forward(std::span<const T> input, const MaskPlan& plan,
                                   Cache* cache) const {
  plan.validate();
  Tensor latent = encode(input, plan.visible, cache ? &cache->enc : nullptr);
  return decode(latent, plan, cache ? &cache->dec : nullptr);
}

template <typename T>
void MaeModel<T>::backward(const Cache& cache, const Tensor& dpred) const {
  encode_backward(cache.enc, decode_backward(cache.dec, dpred));
}

template class MaeModel<float>;
template class MaeModel<double>;

}  // namespace gfm::mae
