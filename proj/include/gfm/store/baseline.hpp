#pragma once

#include <atomic>
#include <filesystem>
#include <span>
#include <vector>

#include "gfm/store/chunk_store.hpp"

namespace gfm::store {

// Reference loader that keeps one file per (sample, timestep, band), the
// layout of per-band scene files. Used to measure how many file handles a
// batch costs without chunking.
class PerBandFileStore {
 public:
  static PerBandFileStore write(const ChunkStore& source, const std::filesystem::path& dir);
  static PerBandFileStore open(const std::filesystem::path& dir);

  std::vector<raster::RasterChip> load_batch(std::span<const std::size_t> ids) const;

  std::uint64_t file_opens() const { return opens_->load(); }
  void reset_file_opens() const { opens_->store(0); }

 private:
  PerBandFileStore(std::filesystem::path dir, StoreManifest manifest);

  std::filesystem::path dir_;
  StoreManifest manifest_;
  std::shared_ptr<std::atomic<std::uint64_t>> opens_;
};

}  // namespace gfm::store
