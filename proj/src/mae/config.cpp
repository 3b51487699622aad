#include "gfm/mae/config.hpp"

#include <string>

namespace gfm::mae {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("model config: " + what);
}

}  // namespace

void MaeConfig::validate() const {
  require(t > 0 && c > 0 && h > 0 && w > 0, "input dims must be positive");
  require(pt > 0 && ph > 0 && pw > 0, "patch dims must be positive");
  require(t % pt == 0 && h % ph == 0 && w % pw == 0, "patch must divide input");
  require(enc_depth > 0, "encoder depth must be positive");
  require(enc_heads > 0 && enc_dim % enc_heads == 0, "encoder heads must divide encoder dim");
  require(dec_heads > 0 && dec_dim % dec_heads == 0, "decoder heads must divide decoder dim");
  require(enc_dim % 16 == 0, "encoder dim must be divisible by 16 for positional encoding");
  require(dec_dim % 16 == 0, "decoder dim must be divisible by 16 for positional encoding");
  require(mlp_ratio > 0, "mlp_ratio must be positive");
  require(mask_ratio > 0.0 && mask_ratio < 1.0, "mask_ratio must be in (0, 1)");
}

nlohmann::json MaeConfig::to_json() const {
  return {{"input", {t, c, h, w}},
          {"patch", {pt, ph, pw}},
          {"encoder", {{"dim", enc_dim}, {"depth", enc_depth}, {"heads", enc_heads}}},
          {"decoder", {{"dim", dec_dim}, {"depth", dec_depth}, {"heads", dec_heads}}},
          {"mlp_ratio", mlp_ratio},
          {"mask_ratio", mask_ratio},
          {"norm_pix_loss", norm_pix_loss}};
}

MaeConfig MaeConfig::from_json(const nlohmann::json& j) {
  MaeConfig cfg;
  try {
    if (j.contains("input")) {
      const auto v = j.at("input").get<std::vector<std::size_t>>();
      if (v.size() != 4) throw ConfigError("model config: /input must have 4 entries");
      cfg.t = v[0], cfg.c = v[1], cfg.h = v[2], cfg.w = v[3];
    }
    if (j.contains("patch")) {
      const auto v = j.at("patch").get<std::vector<std::size_t>>();
      if (v.size() != 3) throw ConfigError("model config: /patch must have 3 entries");
      cfg.pt = v[0], cfg.ph = v[1], cfg.pw = v[2];
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      cfg.enc_dim = e.value("dim", cfg.enc_dim);
      cfg.enc_depth = e.value("depth", cfg.enc_depth);
      cfg.enc_heads = e.value("heads", cfg.enc_heads);
    }
    if (j.contains("decoder")) {
      const auto& d = j.at("decoder");
      cfg.dec_dim = d.value("dim", cfg.dec_dim);
      cfg.dec_depth = d.value("depth", cfg.dec_depth);
      cfg.dec_heads = d.value("heads", cfg.dec_heads);
    }
    cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
    cfg.mask_ratio = j.value("mask_ratio", cfg.mask_ratio);
    cfg.norm_pix_loss = j.value("norm_pix_loss", cfg.norm_pix_loss);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

MaeConfig MaeConfig::tiny() {
  MaeConfig cfg;
  cfg.h = cfg.w = 64;
  cfg.enc_dim = 64;
  cfg.enc_depth = 2;
  cfg.enc_heads = 4;
  cfg.dec_dim = 32;
  cfg.dec_depth = 1;
  cfg.dec_heads = 2;
  cfg.mlp_ratio = 2;
  return cfg;
}

}  // namespace gfm::mae
