#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfm/quality/filter.hpp"
#include "gfm/raster/band_stats.hpp"
#include "gfm/raster/types.hpp"

namespace gfm::store {

struct StoreManifest {
  std::size_t sample_count = 0;
  raster::ChipDims sample_shape;  // (T, C, H, W) of one sample
  raster::DType dtype = raster::DType::kU16;
  std::size_t chunk_samples = 8;
  std::vector<std::string> band_names;
  double nodata_value = 65535.0;
  std::vector<quality::ChipIndexEntry> provenance;
  std::vector<raster::TileId> tiles;  // distinct tiles referenced by provenance
  raster::BandStats band_stats;
  std::vector<std::uint32_t> checksums;  // CRC32 of each sample's raw bytes

  std::size_t chunk_count() const {
    return (sample_count + chunk_samples - 1) / chunk_samples;
  }
  std::size_t sample_bytes() const;

  nlohmann::ordered_json to_json() const;
  static StoreManifest from_json(const nlohmann::json& j);
};

// Source of full tiles for packing; may throw MissingSourceError.
using ChipResolver =
    std::function<std::shared_ptr<const raster::RasterChip>(const std::string& tile_code)>;

struct PackOptions {
  std::size_t chunk_samples = 8;
  // Test hook: throw after writing this many chunk files (simulated crash).
  std::size_t fail_after_chunks = SIZE_MAX;
};

std::string zarr_dtype(raster::DType dtype);
std::string chunk_file_name(std::size_t chunk);

/// Cuts every index entry out of its source tile and writes the samples, in
/// index order, as a Zarr v2 array of shape (N, T, C, H, W) chunked along the
/// sample axis. The store is assembled in a sibling temp directory and then
/// swapped in, so an interrupted pack never leaves a partial store at
/// `out_dir`.
StoreManifest pack(std::span<const quality::ChipIndexEntry> index, const ChipResolver& resolver,
                   const raster::BandStats& stats, const std::filesystem::path& out_dir,
                   const PackOptions& options = {});

/// Read-only handle to a packed store. Copies share the file-open counter.
class ChunkStore {
 public:
  static ChunkStore open(const std::filesystem::path& dir);

  const StoreManifest& manifest() const { return *manifest_; }
  const std::filesystem::path& path() const { return dir_; }
  std::size_t size() const { return manifest_->sample_count; }

  /// Sample i with provenance attached; opens exactly one chunk file.
  raster::RasterChip read_sample(std::size_t i) const;

  /// Raw bytes of one whole chunk (one file open).
  std::vector<std::byte> read_chunk(std::size_t chunk) const;

  /// Builds sample i from the bytes of its chunk, verifying its checksum.
  raster::RasterChip sample_from_chunk(std::size_t i, std::span<const std::byte> chunk) const;

  std::uint64_t file_opens() const { return opens_->load(); }
  void reset_file_opens() const { opens_->store(0); }

 private:
  raster::RasterChip make_sample(std::size_t i, std::span<const std::byte> bytes) const;

  std::filesystem::path dir_;
  std::shared_ptr<const StoreManifest> manifest_;
  std::shared_ptr<std::atomic<std::uint64_t>> opens_;
};

}  // namespace gfm::store
