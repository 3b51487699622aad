#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfm/finetune/seg_model.hpp"
#include "gfm/finetune/segmentation.hpp"
#include "gfm/mae/config.hpp"
#include "gfm/mae/pretrain.hpp"
#include "gfm/quality/filter.hpp"

namespace gfm::cli {

struct SynthSection {
  std::size_t tiles = 16;
  std::uint32_t tile_size = 256;
  std::uint32_t timesteps = 4;
  double cloud_fraction = 0.05;
};

struct SamplerSection {
  int mean_bins = 2;
  int p99_bins = 2;
  std::size_t budget = 16;
};

struct FinetuneSection {
  std::string regime = "pretrained";
  finetune::SegHeadConfig head;
  finetune::SegTrainConfig train;
  std::size_t scenes = 16;
  std::size_t val_scenes = 8;
  std::size_t gapfill_steps = 20;
  std::size_t gapfill_scenes = 16;
  double gapfill_lr = 1e-4;
};

struct EvalSection {
  std::size_t scenes = 8;
  std::size_t gap_scenes = 8;
  double cloud_fraction = 0.2;
};

struct SweepSection {
  std::vector<double> fractions{1.0, 0.5, 0.25, 0.1};
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

// One document per experiment. Unknown keys and type mismatches are rejected
// with a ConfigError naming the JSON pointer of the offending value.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "run";
  SynthSection synth;
  SamplerSection sampler;
  quality::FilterPolicy filter;
  std::size_t chunk_samples = 8;
  mae::MaeConfig model = mae::MaeConfig::tiny();
  mae::PretrainConfig train;
  FinetuneSection finetune;
  EvalSection eval;
  SweepSection sweep;

  RunConfig();
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  // CRC32 of the canonical JSON dump without `out`, as 8 hex digits.
  std::string hash() const;
};

// Schema check alone; throws ConfigError("<pointer>: <reason>").
void check_schema(const nlohmann::json& j);

}  // namespace gfm::cli
