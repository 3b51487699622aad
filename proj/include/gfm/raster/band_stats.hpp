#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "gfm/raster/types.hpp"

namespace gfm::raster {

struct BandStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
  std::uint64_t pixel_count = 0;

  std::size_t bands() const { return mean.size(); }
  bool operator==(const BandStats&) const = default;
};

nlohmann::json to_json(const BandStats& stats);
BandStats band_stats_from_json(const nlohmann::json& j);

/// Streaming per-band mean/variance (Welford updates, Chan merge). A pixel
/// location (t, y, x) is excluded from every band when any band holds the
/// nodata value there or when its quality code is not clear.
class BandStatsAccumulator {
 public:
  void add(const RasterChip& chip, std::span<const QualityMask> quality = {});
  void merge(const BandStatsAccumulator& other);
  BandStats finish() const;

  std::uint64_t count() const { return count_; }

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// `quality`, when non-empty, holds one per-timestep mask list per chip.
BandStats compute_band_stats(std::span<const RasterChip> chips,
                             std::span<const std::vector<QualityMask>> quality = {});

inline constexpr double kStandardizeEpsilon = 1e-6;

RasterChip standardize(const RasterChip& chip, const BandStats& stats);
RasterChip unstandardize(const RasterChip& chip, const BandStats& stats);

/// In-place helpers over a C-order (T, C, H, W) float buffer.
void standardize_values(std::span<float> values, const ChipDims& dims, const BandStats& stats);
void unstandardize_values(std::span<float> values, const ChipDims& dims, const BandStats& stats);

}  // namespace gfm::raster
