#include "gfm/finetune/seg_model.hpp"

#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"

namespace gfm::finetune {

void SegHeadConfig::validate() const {
  if (classes < 2) throw ConfigError("head config: /classes must be >= 2");
  if (classes > 255) throw ConfigError("head config: /classes must fit in a u8 label map");
  for (auto c : neck) {
    if (c == 0) throw ConfigError("head config: /neck channels must be positive");
  }
  if (!class_weights.empty()) {
    if (class_weights.size() != classes) {
      throw ConfigError("head config: /class_weights needs one entry per class");
    }
    for (double w : class_weights) {
      if (!(w >= 0.0)) throw ConfigError("head config: /class_weights must be non-negative");
    }
  }
  if (ignore_label >= 0 && ignore_label < static_cast<int>(classes)) {
    throw ConfigError("head config: /ignore_label collides with a class index");
  }
}

nlohmann::json SegHeadConfig::to_json() const {
  return {{"classes", classes},
          {"neck", neck},
          {"loss", loss == SegLoss::kDice ? "dice" : "weighted_ce"},
          {"class_weights", class_weights},
          {"ignore_label", ignore_label}};
}

SegHeadConfig SegHeadConfig::from_json(const nlohmann::json& j) {
  SegHeadConfig cfg;
  try {
    cfg.classes = j.value("classes", cfg.classes);
    if (j.contains("neck")) {
      const auto v = j.at("neck").get<std::vector<std::size_t>>();
      if (v.size() != 4) throw ConfigError("head config: /neck must have 4 entries");
      std::copy(v.begin(), v.end(), cfg.neck.begin());
    }
    const std::string loss = j.value("loss", std::string("weighted_ce"));
    if (loss == "dice") {
      cfg.loss = SegLoss::kDice;
    } else if (loss == "weighted_ce") {
      cfg.loss = SegLoss::kWeightedCe;
    } else {
      throw ConfigError("head config: /loss must be weighted_ce or dice");
    }
    cfg.class_weights = j.value("class_weights", cfg.class_weights);
    cfg.ignore_label = j.value("ignore_label", cfg.ignore_label);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("head config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

template <typename T>
SegHead<T>::SegHead(nn::ParamStore<T>& store, const std::string& name, std::size_t in_channels,
                    const SegHeadConfig& cfg, Rng& rng) {
  std::size_t in = in_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    up_[i] = nn::TransposeConv2d<T>(store, name + ".neck." + std::to_string(i), in, cfg.neck[i], rng);
    in = cfg.neck[i];
  }
  cls_ = nn::Conv1x1<T>(store, name + ".cls", in, cfg.classes, rng);
}

template <typename T>
nn::Tensor<T> SegHead<T>::forward(const nn::Tensor<T>& x, Cache* cache) const {
  nn::Tensor<T> h = x;
  for (std::size_t i = 0; i < 4; ++i) {
    auto pre = up_[i].forward(h, cache ? &cache->up[i] : nullptr);
    h = nn::gelu(pre);
    if (cache) cache->pre[i] = std::move(pre);
  }
  return cls_.forward(h, cache ? &cache->cls : nullptr);
}

template <typename T>
nn::Tensor<T> SegHead<T>::backward(const Cache& cache, const nn::Tensor<T>& dlogits) const {
  nn::Tensor<T> d = cls_.backward(cache.cls, dlogits);
  for (std::size_t i = 4; i-- > 0;) {
    d = nn::gelu_backward(cache.pre[i], d);
    d = up_[i].backward(cache.up[i], d);
  }
  return d;
}

void FinetuneRegime::validate() const {
  if (!encoder_trainable && init != EncoderInit::kPretrained) {
    throw ConfigError("frozen encoder regime requires pretrained weights");
  }
}

std::string FinetuneRegime::name() const {
  if (!encoder_trainable) return "frozen";
  return init == EncoderInit::kPretrained ? "pretrained" : "random";
}

FinetuneRegime FinetuneRegime::parse(const std::string& name) {
  if (name == "pretrained") return {EncoderInit::kPretrained, true};
  if (name == "random") return {EncoderInit::kRandom, true};
  if (name == "frozen") return {EncoderInit::kPretrained, false};
  throw ConfigError("unknown regime '" + name + "' (pretrained, random, frozen)");
}

std::size_t neck_input_channels(const mae::MaeConfig& cfg) {
  return cfg.geometry().grid_t() * cfg.enc_dim;
}

template <typename T>
SegModel<T>::SegModel(const mae::MaeConfig& mae_cfg, const SegHeadConfig& head_cfg,
                      std::uint64_t seed)
    : head_cfg_(head_cfg), backbone_(mae_cfg, seed) {
  head_cfg_.validate();
  if (mae_cfg.ph != 16 || mae_cfg.pw != 16) {
    throw ConfigError("segmentation neck upsamples 16x and needs 16 x 16 patches, got " +
                      std::to_string(mae_cfg.ph) + " x " + std::to_string(mae_cfg.pw));
  }
  Rng rng(derive_seed(seed, 0x48454144));
  head_ = SegHead<T>(backbone_.params(), "head", neck_input_channels(mae_cfg), head_cfg_, rng);
  all_tokens_.resize(mae_cfg.tokens());
  for (std::size_t i = 0; i < all_tokens_.size(); ++i) all_tokens_[i] = i;
  set_encoder_trainable(true);
}

template <typename T>
void SegModel<T>::set_encoder_trainable(bool trainable) {
  encoder_trainable_ = trainable;
  backbone_.params().set_trainable([trainable](const std::string& name) {
    if (name.rfind("decoder.", 0) == 0) return false;
    if (name.rfind("encoder.", 0) == 0) return trainable;
    return true;
  });
}

template <typename T>
nn::Tensor<T> SegModel<T>::forward(std::span<const T> input, Cache* cache) const {
  const auto& cfg = backbone_.config();
  const auto g = cfg.geometry();
  if (input.size() != cfg.t * cfg.c * cfg.h * cfg.w) {
    throw ShapeError("segmentation input has " + std::to_string(input.size()) +
                     " values; model expects " + nn::shape_str({cfg.t, cfg.c, cfg.h, cfg.w}));
  }
  const auto latent = backbone_.encode(input, all_tokens_, cache ? &cache->enc : nullptr);
  const std::size_t d = cfg.enc_dim, gt = g.grid_t(), gh = g.grid_h(), gw = g.grid_w();
  nn::Tensor<T> fmap({gt * d, gh, gw});
  for (std::size_t t = 0; t < gt; ++t) {
    for (std::size_t y = 0; y < gh; ++y) {
      for (std::size_t x = 0; x < gw; ++x) {
        const T* row = latent.data() + ((t * gh + y) * gw + x) * d;
        for (std::size_t k = 0; k < d; ++k) fmap.data()[((t * d + k) * gh + y) * gw + x] = row[k];
      }
    }
  }
  return head_.forward(fmap, cache ? &cache->head : nullptr);
}

template <typename T>
void SegModel<T>::backward(const Cache& cache, const nn::Tensor<T>& dlogits) const {
  const auto dmap = head_.backward(cache.head, dlogits);
  if (!encoder_trainable_) return;
  const auto& cfg = backbone_.config();
  const auto g = cfg.geometry();
  const std::size_t d = cfg.enc_dim, gt = g.grid_t(), gh = g.grid_h(), gw = g.grid_w();
  nn::Tensor<T> dlatent({gt * gh * gw, d});
  for (std::size_t t = 0; t < gt; ++t) {
    for (std::size_t y = 0; y < gh; ++y) {
      for (std::size_t x = 0; x < gw; ++x) {
        T* row = dlatent.data() + ((t * gh + y) * gw + x) * d;
        for (std::size_t k = 0; k < d; ++k) row[k] = dmap.data()[((t * d + k) * gh + y) * gw + x];
      }
    }
  }
  backbone_.encode_backward(cache.enc, dlatent);
}

void apply_regime(SegModel<float>& model, const FinetuneRegime& regime,
                  const nn::Checkpoint* pretrained) {
  regime.validate();
  if (regime.init == EncoderInit::kPretrained) {
    if (!pretrained) throw ConfigError("regime '" + regime.name() + "' needs a pretrained checkpoint");
    nn::apply_checkpoint(*pretrained, model.params(), [](const std::string& name) {
      return name.rfind("encoder.", 0) == 0;
    });
  }
  model.set_encoder_trainable(regime.encoder_trainable);
}

template class SegHead<float>;
template class SegHead<double>;
template class SegModel<float>;
template class SegModel<double>;

}  // namespace gfm::finetune
