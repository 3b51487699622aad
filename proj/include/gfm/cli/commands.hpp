#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfm/cli/config.hpp"

namespace gfm::cli {

struct Context {
  RunConfig cfg;
  std::size_t workers = 1;
};

// Artifact locations under the run directory.
namespace paths {
inline constexpr const char* kTiles = "tiles";
inline constexpr const char* kClimate = "climate.csv";
inline constexpr const char* kSample = "sample.txt";
inline constexpr const char* kIndex = "index.jsonl";
inline constexpr const char* kStore = "store";
inline constexpr const char* kPretrainCkpt = "pretrain/ckpt";
inline constexpr const char* kPretrainLog = "pretrain/loss.csv";
inline constexpr const char* kFinetuneCkpt = "finetune/ckpt";
inline constexpr const char* kFinetuneLog = "finetune/log.csv";
inline constexpr const char* kGapfillCkpt = "gapfill/ckpt";
inline constexpr const char* kGapfillLog = "gapfill/log.csv";
inline constexpr const char* kMetricsJson = "eval/metrics.json";
inline constexpr const char* kMetricsCsv = "eval/metrics.csv";
inline constexpr const char* kSweepCsv = "sweep/sweep.csv";
inline constexpr const char* kPlots = "plots";
inline constexpr const char* kManifests = "manifests";
}  // namespace paths

// Stage order of the full pipeline.
const std::vector<std::string>& stage_names();

// Each command reads prior-stage artifacts from cfg.out, writes its own, and
// records manifests/<stage>.json. A missing prerequisite raises StageError
// naming the stage that produces it. The returned summary is also stored in
// the manifest.
nlohmann::json cmd_synth(const Context& ctx);
nlohmann::json cmd_sample(const Context& ctx);
nlohmann::json cmd_filter(const Context& ctx);
nlohmann::json cmd_pack(const Context& ctx);
nlohmann::json cmd_pretrain(const Context& ctx);
nlohmann::json cmd_finetune(const Context& ctx);
nlohmann::json cmd_eval(const Context& ctx);
nlohmann::json cmd_sweep(const Context& ctx);
// Renders every known CSV log present in the run directory.
nlohmann::json cmd_plot(const Context& ctx);

nlohmann::json run_stage(const std::string& name, const Context& ctx);
nlohmann::json cmd_pipeline(const Context& ctx);

// Single chart from an arbitrary CSV: x column against one or more y columns.
void plot_csv(const std::filesystem::path& input, const std::string& x,
              const std::vector<std::string>& ys, const std::filesystem::path& output,
              const std::string& title = {});

// CRC32 over a file, or over the sorted relative names and contents of a directory.
std::string hash_path(const std::filesystem::path& path);

}  // namespace gfm::cli
