#pragma once

#include <cstddef>

#include <json.hpp>

#include "gfm/nn/layers.hpp"

namespace gfm::mae {

struct MaeConfig {
  // Input (T, C, H, W) and tubelet (pt, ph, pw).
  std::size_t t = 3, c = 6, h = 224, w = 224;
  std::size_t pt = 1, ph = 16, pw = 16;

  std::size_t enc_dim = 768, enc_depth = 12, enc_heads = 12;
  std::size_t dec_dim = 384, dec_depth = 4, dec_heads = 6;
  std::size_t mlp_ratio = 4;
  double mask_ratio = 0.75;
  // Normalize each target patch to zero mean / unit variance before the loss.
  bool norm_pix_loss = false;

  void validate() const;  // ConfigError
  nn::PatchGeometry geometry() const { return {t, c, h, w, pt, ph, pw}; }
  std::size_t tokens() const { return geometry().tokens(); }
  std::size_t patch_size() const { return geometry().patch_size(); }

  nlohmann::json to_json() const;
  static MaeConfig from_json(const nlohmann::json& j);

  // Desk-scale model: 3 x 6 x 64 x 64 input, 16 px patches, dim 64 depth 2/1.
  static MaeConfig tiny();
};

}  // namespace gfm::mae
