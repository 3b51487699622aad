#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gfm/common/error.hpp"
#include "gfm/quality/filter.hpp"
#include "gfm/raster/band_stats.hpp"
#include "gfm/raster/synthetic.hpp"
#include "gfm/store/chunk_store.hpp"

namespace gfm::testing {

// A handful of clear synthetic tiles and the index of all their windows.
struct TileSet {
  std::map<std::string, std::shared_ptr<const raster::RasterChip>> tiles;
  std::vector<quality::ChipIndexEntry> index;
  raster::BandStats stats;

  store::ChipResolver resolver() const {
    return [this](const std::string& code) -> std::shared_ptr<const raster::RasterChip> {
      auto it = tiles.find(code);
      if (it == tiles.end()) throw MissingSourceError("unknown tile " + code);
      return it->second;
    };
  }
};

inline TileSet make_tile_set(std::size_t tile_count, std::uint32_t tile_size, std::uint32_t window,
                             std::uint32_t timesteps = 3, std::uint64_t seed = 1) {
  TileSet set;
  raster::BandStatsAccumulator acc;
  quality::FilterPolicy policy;
  policy.window_x = policy.window_y = window;
  policy.timesteps_required = timesteps;
  for (std::size_t i = 0; i < tile_count; ++i) {
    auto [chip, masks] = raster::generate_synthetic_tile(seed * 1000 + i, tile_size, timesteps, 0.0);
    acc.add(chip, masks);
    auto entries = quality::filter_tile(masks, policy);
    set.index.insert(set.index.end(), entries.begin(), entries.end());
    const std::string code = chip.origin().tile.tile_code;
    set.tiles.emplace(code, std::make_shared<const raster::RasterChip>(std::move(chip)));
  }
  set.stats = acc.finish();
  return set;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gfm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gfm::testing
