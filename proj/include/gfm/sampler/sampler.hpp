#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gfm/raster/types.hpp"

namespace gfm::sampler {

struct ClimateCell {
  raster::TileId tile;
  double mean_value = 0.0;  // e.g. mean temperature
  double p99_value = 0.0;   // e.g. 99th-percentile precipitation
};

struct ClimateGrid {
  std::vector<ClimateCell> cells;
  std::string resolution = "tile";

  void validate() const;
};

// CSV with header `tile_code,utm_zone,lat_band,mean_value,p99_value`.
ClimateGrid read_climate_grid(const std::filesystem::path& path);
void write_climate_grid(const ClimateGrid& grid, const std::filesystem::path& path);

// Climate-like statistics for synthetic tiles: smooth gradients over a
// pseudo-geographic layout plus noise.
ClimateGrid make_synthetic_climate_grid(std::uint64_t seed, std::span<const raster::TileId> tiles);

struct GroupAssignment {
  std::vector<raster::TileId> tiles;  // same order as the grid cells
  std::vector<int> group;             // per cell, in [0, group_count)
  int group_count = 1;
  int mean_bins = 1;
  int p99_bins = 1;
  std::vector<double> mean_edges;  // inclusive upper edges, mean_bins - 1 of them
  std::vector<double> p99_edges;
  bool degenerate = false;  // some quantile bins collapsed

  std::vector<std::vector<std::size_t>> members() const;  // cell indices per group
};

/// Equal-frequency binning of each statistic independently; the group id is
/// mean_bin * p99_bins + p99_bin. A value equal to an edge falls in the lower
/// bin, so the assignment only depends on the values, not the cell order.
GroupAssignment assign_groups(const ClimateGrid& grid, int mean_bins, int p99_bins);

/// Quantile edges for `bins` bins over `values`: edge k is the value at sorted
/// position ceil((k+1) n / bins) - 1.
std::vector<double> quantile_edges(std::vector<double> values, int bins);
int bin_of(double value, std::span<const double> edges);

/// Per-group quotas for `budget` over groups with the given populations:
/// even split across non-empty groups (lower ids take the remainder), then any
/// shortfall from small groups handed out round-robin to the groups with the
/// most spare capacity.
std::vector<std::size_t> group_quotas(std::span<const std::size_t> populations, std::size_t budget);

/// Group-major list of sampled tiles, uniform without replacement per group.
std::vector<raster::TileId> stratified_sample(const GroupAssignment& assignment,
                                              std::size_t budget, std::uint64_t seed);

void write_sample(std::span<const raster::TileId> tiles, const std::filesystem::path& path);
std::vector<std::string> read_sample(const std::filesystem::path& path);

}  // namespace gfm::sampler
