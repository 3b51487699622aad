#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gfm/finetune/segmentation.hpp"

namespace gfm::finetune {

// floor(fraction * n) distinct indices in ascending order, seeded.
// Raises ArgumentError for fractions outside (0, 1] or an empty subsample.
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed);

struct SweepRow {
  double fraction = 0.0;
  std::string seed;  // run seed, or "mean" / "std" for summary rows
  std::string metric;
  double value = 0.0;
};

using ModelFactory = std::function<SegModel<float>(std::uint64_t seed)>;

// Fine-tunes a fresh model on each (fraction, seed) subsample of `train` and
// scores mIoU on the fixed `val` split. Runs execute on `workers` threads.
std::vector<SweepRow> run_data_efficiency_sweep(const SegData& train, const SegData& val,
                                                std::span<const double> fractions,
                                                std::span<const std::uint64_t> seeds,
                                                const ModelFactory& make_model,
                                                const SegTrainConfig& cfg, std::size_t workers = 1);

// Appends mean and population std rows for every (fraction, metric).
std::vector<SweepRow> with_summary(std::vector<SweepRow> rows);

std::string sweep_csv(std::span<const SweepRow> rows);  // fraction,seed,metric,value

}  // namespace gfm::finetune
