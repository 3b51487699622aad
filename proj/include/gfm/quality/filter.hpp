#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gfm/raster/types.hpp"

namespace gfm::quality {

struct ChipIndexEntry {
  std::string tile_code;
  std::vector<std::string> timestamps;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t window_x = 224;
  std::uint32_t window_y = 224;

  bool operator==(const ChipIndexEntry&) const = default;
};

struct FilterPolicy {
  std::uint32_t window_x = 224;
  std::uint32_t window_y = 224;
  double bad_fraction_threshold = 0.05;
  std::vector<std::uint8_t> bad_codes{raster::kCloud, raster::kCloudShadow, raster::kAdjacent,
                                      raster::kNoData};
  std::uint32_t timesteps_required = 3;

  void validate() const;
  bool is_bad(std::uint8_t code) const;
};

struct WindowScore {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  double bad_fraction = 0.0;
};

// Non-overlapping windows in row-major order from (0, 0); partial windows at
// the right and bottom edges are dropped.
std::vector<WindowScore> scan_windows(const raster::QualityMask& mask, const FilterPolicy& policy);

// One entry per window position and run of `timesteps_required` consecutive
// timestamps whose every bad fraction is within the threshold. Masks are put
// in timestamp order first; output is sorted by (y, x, first timestamp).
std::vector<ChipIndexEntry> filter_tile(std::span<const raster::QualityMask> masks,
                                        const FilterPolicy& policy);

// Canonical order used when merging per-tile results.
void sort_entries(std::vector<ChipIndexEntry>& entries);

// JSON Lines: {"tile", "timestamps", "x", "y", "window": [X, Y]} per line.
std::string format_index_line(const ChipIndexEntry& entry);
ChipIndexEntry parse_index_line(const std::string& line, std::size_t line_no = 1);
void write_index(std::span<const ChipIndexEntry> entries, const std::filesystem::path& path);
std::vector<ChipIndexEntry> read_index(const std::filesystem::path& path);

}  // namespace gfm::quality
