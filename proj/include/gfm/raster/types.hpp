#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gfm::raster {

struct TileId {
  int utm_zone = 1;
  char lat_band = 'S';
  std::string tile_code;

  void validate() const;
  bool operator==(const TileId&) const = default;
};

struct ChipOrigin {
  TileId tile;
  std::uint32_t x = 0;
  std::uint32_t y = 0;

  bool operator==(const ChipOrigin&) const = default;
};

enum class DType : std::uint8_t { kU16 = 0, kF32 = 1, kU8 = 2 };

struct ChipDims {
  std::uint32_t t = 0;
  std::uint32_t c = 0;
  std::uint32_t h = 0;
  std::uint32_t w = 0;

  std::size_t count() const { return std::size_t{t} * c * h * w; }
  std::size_t offset(std::size_t ti, std::size_t ci, std::size_t yi, std::size_t xi) const {
    return ((ti * c + ci) * h + yi) * w + xi;
  }
  bool operator==(const ChipDims&) const = default;
};

const std::vector<std::string>& default_band_names();

// (T, C, H, W) block of reflectance values plus identifying metadata.
// Immutable after construction; the constructor enforces every invariant.
class RasterChip {
 public:
  using Storage = std::variant<std::vector<std::uint16_t>, std::vector<float>>;

  RasterChip(ChipDims dims, Storage data, std::vector<std::string> band_names,
             std::vector<std::string> timestamps, ChipOrigin origin, double nodata_value);

  const ChipDims& dims() const { return dims_; }
  DType dtype() const;
  const std::vector<std::string>& band_names() const { return band_names_; }
  const std::vector<std::string>& timestamps() const { return timestamps_; }
  const ChipOrigin& origin() const { return origin_; }
  double nodata_value() const { return nodata_; }
  const Storage& storage() const { return data_; }

  template <typename T>
  std::span<const T> values() const {
    return std::get<std::vector<T>>(data_);
  }

  double at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const;
  std::vector<float> to_float() const;

  bool operator==(const RasterChip& other) const;

 private:
  ChipDims dims_;
  Storage data_;
  std::vector<std::string> band_names_;
  std::vector<std::string> timestamps_;
  ChipOrigin origin_;
  double nodata_;
};

enum QualityCode : std::uint8_t {
  kClear = 0,
  kCloud = 1,
  kCloudShadow = 2,
  kAdjacent = 3,
  kNoData = 255,
};

bool is_quality_code(std::uint8_t code);

// Single-timestep categorical quality raster aligned with a chip.
struct QualityMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> codes;
  ChipOrigin origin;
  std::string timestamp;

  std::uint8_t at(std::size_t y, std::size_t x) const { return codes[y * width + x]; }
  void validate() const;
  bool operator==(const QualityMask&) const = default;
};

void validate_timestamps(const std::vector<std::string>& timestamps);

// Cuts the (timesteps, all bands, y..y+h, x..x+w) block out of a tile; the
// result's origin records (x, y) relative to the tile.
RasterChip cut_window(const RasterChip& tile, std::span<const std::string> timestamps,
                      std::uint32_t x, std::uint32_t y, std::uint32_t w, std::uint32_t h);

}  // namespace gfm::raster
