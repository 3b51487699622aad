#include "gfm/raster/types.hpp"

#include <algorithm>
#include <cstring>

#include "gfm/common/error.hpp"

namespace gfm::raster {

void TileId::validate() const {
  if (tile_code.empty()) throw ArgumentError("tile code must be non-empty");
  if (utm_zone < 1 || utm_zone > 60) {
    throw ArgumentError("utm zone " + std::to_string(utm_zone) + " outside [1, 60]");
  }
}

const std::vector<std::string>& default_band_names() {
  static const std::vector<std::string> names{"B02", "B03", "B04", "B05", "B06", "B07"};
  return names;
}

void validate_timestamps(const std::vector<std::string>& timestamps) {
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i - 1] < timestamps[i])) {
      throw ArgumentError("timestamps not strictly increasing at " + timestamps[i]);
    }
  }
}

RasterChip::RasterChip(ChipDims dims, Storage data, std::vector<std::string> band_names,
                       std::vector<std::string> timestamps, ChipOrigin origin,
                       double nodata_value)
    : dims_(dims),
      data_(std::move(data)),
      band_names_(std::move(band_names)),
      timestamps_(std::move(timestamps)),
      origin_(std::move(origin)),
      nodata_(nodata_value) {
  if (dims_.t < 1 || dims_.c < 1) throw ArgumentError("chip needs T >= 1 and C >= 1");
  const std::size_t n = std::visit([](const auto& v) { return v.size(); }, data_);
  if (n != dims_.count()) {
    throw ShapeError("chip payload has " + std::to_string(n) + " values, dims need " +
                     std::to_string(dims_.count()));
  }
  if (band_names_.size() != dims_.c) throw ArgumentError("band name count != C");
  if (timestamps_.size() != dims_.t) throw ArgumentError("timestamp count != T");
  validate_timestamps(timestamps_);
  origin_.tile.validate();
}

DType RasterChip::dtype() const {
  return std::holds_alternative<std::vector<std::uint16_t>>(data_) ? DType::kU16 : DType::kF32;
}

double RasterChip::at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
  const std::size_t i = dims_.offset(t, c, y, x);
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, data_);
}

std::vector<float> RasterChip::to_float() const {
  return std::visit(
      [](const auto& v) { return std::vector<float>(v.begin(), v.end()); }, data_);
}

bool RasterChip::operator==(const RasterChip& other) const {
  if (dims_ != other.dims_ || dtype() != other.dtype() || band_names_ != other.band_names_ ||
      timestamps_ != other.timestamps_ || origin_ != other.origin_) {
    return false;
  }
  if (std::memcmp(&nodata_, &other.nodata_, sizeof(double)) != 0) return false;
  // Bitwise payload comparison so NaN payloads compare equal to themselves.
  return std::visit(
      [&](const auto& a) {
        using V = std::decay_t<decltype(a)>;
        const auto& b = std::get<V>(other.data_);
        return std::memcmp(a.data(), b.data(), a.size() * sizeof(typename V::value_type)) == 0;
      },
      data_);
}

bool is_quality_code(std::uint8_t code) {
  return code == kClear || code == kCloud || code == kCloudShadow || code == kAdjacent ||
         code == kNoData;
}

void QualityMask::validate() const {
  if (codes.size() != std::size_t{height} * width) {
    throw ShapeError("quality mask has " + std::to_string(codes.size()) + " codes for " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (!is_quality_code(codes[i])) {
      throw FormatError("invalid quality code " + std::to_string(codes[i]) + " at pixel " +
                        std::to_string(i));
    }
  }
}

RasterChip cut_window(const RasterChip& tile, std::span<const std::string> timestamps,
                      std::uint32_t x, std::uint32_t y, std::uint32_t w, std::uint32_t h) {
  const ChipDims& src = tile.dims();
  if (std::size_t{x} + w > src.w || std::size_t{y} + h > src.h) {
    throw ShapeError("window " + std::to_string(w) + "x" + std::to_string(h) + " at (" +
                     std::to_string(x) + "," + std::to_string(y) + ") exceeds tile " +
                     std::to_string(src.w) + "x" + std::to_string(src.h));
  }
  std::vector<std::size_t> t_index;
  for (const auto& ts : timestamps) {
    auto it = std::find(tile.timestamps().begin(), tile.timestamps().end(), ts);
    if (it == tile.timestamps().end()) {
      throw MissingSourceError("tile " + tile.origin().tile.tile_code + " has no timestamp " + ts);
    }
    t_index.push_back(static_cast<std::size_t>(it - tile.timestamps().begin()));
  }
  const ChipDims out{static_cast<std::uint32_t>(timestamps.size()), src.c, h, w};
  RasterChip::Storage storage = std::visit(
      [&](const auto& v) -> RasterChip::Storage {
        std::decay_t<decltype(v)> dst(out.count());
        for (std::size_t ti = 0; ti < out.t; ++ti)
          for (std::size_t c = 0; c < out.c; ++c)
            for (std::size_t yy = 0; yy < h; ++yy) {
              const auto* from = v.data() + src.offset(t_index[ti], c, y + yy, x);
              std::copy(from, from + w, dst.data() + out.offset(ti, c, yy, 0));
            }
        return dst;
      },
      tile.storage());
  ChipOrigin origin{tile.origin().tile, tile.origin().x + x, tile.origin().y + y};
  return RasterChip(out, std::move(storage), tile.band_names(),
                    std::vector<std::string>(timestamps.begin(), timestamps.end()), origin,
                    tile.nodata_value());
}

}  // namespace gfm::raster
