#include "gfm/raster/band_stats.hpp"

#include <algorithm>
#include <cmath>

#include "gfm/common/error.hpp"

namespace gfm::raster {

nlohmann::json to_json(const BandStats& stats) {
  return {{"mean", stats.mean}, {"std", stats.std}, {"pixel_count", stats.pixel_count}};
}

BandStats band_stats_from_json(const nlohmann::json& j) {
  BandStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.pixel_count = j.at("pixel_count").get<std::uint64_t>();
  if (s.mean.size() != s.std.size()) throw FormatError("band stats mean/std length differ");
  return s;
}

void BandStatsAccumulator::add(const RasterChip& chip, std::span<const QualityMask> quality) {
  const ChipDims& d = chip.dims();
  if (mean_.empty()) {
    mean_.assign(d.c, 0.0);
    m2_.assign(d.c, 0.0);
  } else if (mean_.size() != d.c) {
    throw ShapeError("chip has " + std::to_string(d.c) + " bands, accumulator has " +
                     std::to_string(mean_.size()));
  }
  if (!quality.empty()) {
    if (quality.size() != d.t) throw ShapeError("need one quality mask per timestep");
    for (const auto& q : quality) {
      if (q.height != d.h || q.width != d.w) throw ShapeError("quality mask not aligned with chip");
    }
  }
  const double nodata = chip.nodata_value();
  std::vector<double> px(d.c);
  for (std::size_t t = 0; t < d.t; ++t) {
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t x = 0; x < d.w; ++x) {
        if (!quality.empty() && quality[t].at(y, x) != kClear) continue;
        bool valid = true;
        for (std::size_t c = 0; c < d.c; ++c) {
          px[c] = chip.at(t, c, y, x);
          if (px[c] == nodata || std::isnan(px[c])) valid = false;
        }
        if (!valid) continue;
        ++count_;
        const double n = static_cast<double>(count_);
        for (std::size_t c = 0; c < d.c; ++c) {
          const double delta = px[c] - mean_[c];
          mean_[c] += delta / n;
          m2_[c] += delta * (px[c] - mean_[c]);
        }
      }
    }
  }
}

void BandStatsAccumulator::merge(const BandStatsAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size()) throw ShapeError("merging accumulators of different band counts");
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t c = 0; c < mean_.size(); ++c) {
    const double delta = other.mean_[c] - mean_[c];
    mean_[c] += delta * nb / n;
    m2_[c] += other.m2_[c] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

BandStats BandStatsAccumulator::finish() const {
  if (count_ == 0) throw EmptyInputError("no valid pixels for band statistics");
  BandStats s;
  s.mean = mean_;
  s.std.resize(mean_.size());
  for (std::size_t c = 0; c < mean_.size(); ++c) {
    s.std[c] = std::sqrt(std::max(0.0, m2_[c] / static_cast<double>(count_)));
  }
  s.pixel_count = count_;
  return s;
}

BandStats compute_band_stats(std::span<const RasterChip> chips,
                             std::span<const std::vector<QualityMask>> quality) {
  if (!quality.empty() && quality.size() != chips.size()) {
    throw ShapeError("quality stream length differs from chip stream");
  }
  BandStatsAccumulator acc;
  for (std::size_t i = 0; i < chips.size(); ++i) {
    acc.add(chips[i], quality.empty() ? std::span<const QualityMask>{}
                                      : std::span<const QualityMask>(quality[i]));
  }
  return acc.finish();
}

namespace {

void check_bands(const ChipDims& dims, const BandStats& stats) {
  if (stats.bands() != dims.c || stats.std.size() != dims.c) {
    throw ShapeError("band stats cover " + std::to_string(stats.bands()) + " bands, chip has " +
                     std::to_string(dims.c));
  }
}

}  // namespace

void standardize_values(std::span<float> values, const ChipDims& dims, const BandStats& stats) {
  check_bands(dims, stats);
  const std::size_t plane = std::size_t{dims.h} * dims.w;
  for (std::size_t t = 0; t < dims.t; ++t) {
    for (std::size_t c = 0; c < dims.c; ++c) {
      const double mean = stats.mean[c];
      const double inv = 1.0 / std::max(stats.std[c], kStandardizeEpsilon);
      float* p = values.data() + (t * dims.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - mean) * inv);
    }
  }
}

void unstandardize_values(std::span<float> values, const ChipDims& dims, const BandStats& stats) {
  check_bands(dims, stats);
  const std::size_t plane = std::size_t{dims.h} * dims.w;
  for (std::size_t t = 0; t < dims.t; ++t) {
    for (std::size_t c = 0; c < dims.c; ++c) {
      const double mean = stats.mean[c];
      const double scale = std::max(stats.std[c], kStandardizeEpsilon);
      float* p = values.data() + (t * dims.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>(p[i] * scale + mean);
    }
  }
}

RasterChip standardize(const RasterChip& chip, const BandStats& stats) {
  check_bands(chip.dims(), stats);
  auto values = chip.to_float();
  standardize_values(values, chip.dims(), stats);
  return RasterChip(chip.dims(), std::move(values), chip.band_names(), chip.timestamps(),
                    chip.origin(), chip.nodata_value());
}

RasterChip unstandardize(const RasterChip& chip, const BandStats& stats) {
  check_bands(chip.dims(), stats);
  auto values = chip.to_float();
  unstandardize_values(values, chip.dims(), stats);
  return RasterChip(chip.dims(), std::move(values), chip.band_names(), chip.timestamps(),
                    chip.origin(), chip.nodata_value());
}

}  // namespace gfm::raster
