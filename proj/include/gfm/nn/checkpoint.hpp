#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "gfm/nn/param_store.hpp"

namespace gfm::nn {

struct CheckpointEntry {
  Tensor<float> value;
  Tensor<float> m;  // empty when optimizer state was not saved
  Tensor<float> v;
  std::uint64_t step = 0;
};

struct Checkpoint {
  std::map<std::string, CheckpointEntry> entries;
  nlohmann::json meta;  // free-form: schedule, rng state, config
};

// Writes ckpt.json + ckpt.bin (little-endian f32 in name order).
void save_checkpoint(const ParamStore<float>& params, const std::filesystem::path& dir,
                     const nlohmann::json& meta = nlohmann::json::object(),
                     bool optimizer_state = true);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Copies selected parameters (all by default) into `params`. Each selected
// model parameter must exist in the checkpoint with the same shape.
void apply_checkpoint(const Checkpoint& ckpt, ParamStore<float>& params,
                      const std::function<bool(const std::string&)>& select = {},
                      bool optimizer_state = false);

}  // namespace gfm::nn
