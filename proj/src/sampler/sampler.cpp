#include "gfm/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/error.hpp"
#include "gfm/common/log.hpp"
#include "gfm/common/rng.hpp"

namespace gfm::sampler {

namespace {

constexpr const char* kHeader = "tile_code,utm_zone,lat_band,mean_value,p99_value";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

}  // namespace

void ClimateGrid::validate() const {
  std::set<std::string> seen;
  for (const auto& cell : cells) {
    cell.tile.validate();
    if (!std::isfinite(cell.mean_value) || !std::isfinite(cell.p99_value)) {
      throw ArgumentError("non-finite statistic for tile " + cell.tile.tile_code);
    }
    if (!seen.insert(cell.tile.tile_code).second) {
      throw ArgumentError("duplicate tile " + cell.tile.tile_code + " in climate grid");
    }
  }
}

ClimateGrid read_climate_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open climate grid " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("climate grid is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw ParseError("climate grid header must be '" + std::string(kHeader) + "'");
  ClimateGrid grid;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 5) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                       std::to_string(f.size()));
    }
    if (f[2].size() != 1) throw ParseError("line " + std::to_string(line_no) + ": bad lat_band");
    ClimateCell cell;
    cell.tile.tile_code = f[0];
    cell.tile.utm_zone = static_cast<int>(parse_double(f[1], line_no));
    cell.tile.lat_band = f[2][0];
    cell.mean_value = parse_double(f[3], line_no);
    cell.p99_value = parse_double(f[4], line_no);
    grid.cells.push_back(std::move(cell));
  }
  grid.validate();
  return grid;
}

void write_climate_grid(const ClimateGrid& grid, const std::filesystem::path& path) {
  std::ostringstream os;
  os << kHeader << '\n';
  os.precision(17);
  for (const auto& c : grid.cells) {
    os << c.tile.tile_code << ',' << c.tile.utm_zone << ',' << c.tile.lat_band << ','
       << c.mean_value << ',' << c.p99_value << '\n';
  }
  write_text(path, os.str());
}

ClimateGrid make_synthetic_climate_grid(std::uint64_t seed,
                                        std::span<const raster::TileId> tiles) {
  ClimateGrid grid;
  Rng rng(derive_seed(seed, 0xC11A));
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    // Pseudo-geographic placement: zone ~ longitude, a random latitude.
    const double lon = (tiles[i].utm_zone - 10) / 10.0 + rng.uniform(-0.05, 0.05);
    const double lat = rng.uniform();
    const double temp = 24.0 - 18.0 * lat + 3.0 * std::sin(6.0 * lon) + rng.normal();
    const double precip = 20.0 + 60.0 * lon * (1.0 - 0.5 * lat) + 5.0 * rng.normal();
    grid.cells.push_back({tiles[i], temp, precip});
  }
  return grid;
}

std::vector<double> quantile_edges(std::vector<double> values, int bins) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::vector<double> edges;
  for (int k = 1; k < bins; ++k) {
    const std::size_t pos = (static_cast<std::size_t>(k) * n + bins - 1) / bins;  // ceil(k n / bins)
    edges.push_back(values[std::max<std::size_t>(pos, 1) - 1]);
  }
  return edges;
}

int bin_of(double value, std::span<const double> edges) {
  // First edge >= value; ties resolve to the lower bin.
  return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

std::vector<std::vector<std::size_t>> GroupAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(group_count));
  for (std::size_t i = 0; i < group.size(); ++i) out[static_cast<std::size_t>(group[i])].push_back(i);
  return out;
}

GroupAssignment assign_groups(const ClimateGrid& grid, int mean_bins, int p99_bins) {
  if (mean_bins < 1 || p99_bins < 1) throw ArgumentError("bin counts must be >= 1");
  if (grid.cells.empty()) throw ArgumentError("climate grid is empty");
  grid.validate();
  GroupAssignment out;
  out.mean_bins = mean_bins;
  out.p99_bins = p99_bins;
  out.group_count = mean_bins * p99_bins;
  std::vector<double> means, p99s;
  for (const auto& c : grid.cells) {
    means.push_back(c.mean_value);
    p99s.push_back(c.p99_value);
    out.tiles.push_back(c.tile);
  }
  out.mean_edges = quantile_edges(means, mean_bins);
  out.p99_edges = quantile_edges(p99s, p99_bins);
  std::vector<std::size_t> mean_hits(static_cast<std::size_t>(mean_bins), 0);
  std::vector<std::size_t> p99_hits(static_cast<std::size_t>(p99_bins), 0);
  for (const auto& c : grid.cells) {
    const int b1 = bin_of(c.mean_value, out.mean_edges);
    const int b2 = bin_of(c.p99_value, out.p99_edges);
    out.group.push_back(b1 * p99_bins + b2);
    ++mean_hits[static_cast<std::size_t>(b1)];
    ++p99_hits[static_cast<std::size_t>(b2)];
  }
  auto has_empty = [](const std::vector<std::size_t>& hits) {
    return std::find(hits.begin(), hits.end(), 0u) != hits.end();
  };
  if (has_empty(mean_hits) || has_empty(p99_hits)) {
    out.degenerate = true;
    log::warn("quantile bins collapsed", {{"mean_bins", mean_bins}, {"p99_bins", p99_bins}});
  }
  return out;
}

std::vector<std::size_t> group_quotas(std::span<const std::size_t> populations,
                                      std::size_t budget) {
  const std::size_t total = std::accumulate(populations.begin(), populations.end(), std::size_t{0});
  if (budget < 1) throw ArgumentError("sample budget must be >= 1");
  if (budget > total) {
    throw ArgumentError("budget " + std::to_string(budget) + " exceeds population " +
                        std::to_string(total));
  }
  std::vector<std::size_t> non_empty;
  for (std::size_t g = 0; g < populations.size(); ++g)
    if (populations[g] > 0) non_empty.push_back(g);
  std::vector<std::size_t> quota(populations.size(), 0);
  const std::size_t base = budget / non_empty.size();
  const std::size_t extra = budget % non_empty.size();
  for (std::size_t k = 0; k < non_empty.size(); ++k) quota[non_empty[k]] = base + (k < extra ? 1 : 0);

  std::size_t shortfall = 0;
  for (std::size_t g : non_empty) {
    if (quota[g] > populations[g]) {
      shortfall += quota[g] - populations[g];
      quota[g] = populations[g];
    }
  }
  while (shortfall > 0) {
    std::vector<std::size_t> open;
    for (std::size_t g : non_empty)
      if (populations[g] > quota[g]) open.push_back(g);
    // Largest remaining groups first; ids break ties.
    std::stable_sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
      return populations[a] - quota[a] > populations[b] - quota[b];
    });
    for (std::size_t g : open) {
      if (shortfall == 0) break;
      ++quota[g];
      --shortfall;
    }
  }
  return quota;
}

std::vector<raster::TileId> stratified_sample(const GroupAssignment& assignment,
                                              std::size_t budget, std::uint64_t seed) {
  auto members = assignment.members();
  std::vector<std::size_t> populations;
  for (auto& m : members) {
    // Canonical member order so storage order of cells does not matter.
    std::sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) {
      return assignment.tiles[a].tile_code < assignment.tiles[b].tile_code;
    });
    populations.push_back(m.size());
  }
  const auto quota = group_quotas(populations, budget);
  std::vector<raster::TileId> out;
  for (std::size_t g = 0; g < members.size(); ++g) {
    auto& m = members[g];
    Rng rng(derive_seed(seed, 0x5A3B, g));
    // Partial Fisher-Yates: the first quota[g] slots are a uniform sample.
    for (std::size_t i = 0; i < quota[g]; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(m.size() - i));
      std::swap(m[i], m[j]);
      out.push_back(assignment.tiles[m[i]]);
    }
  }
  return out;
}

void write_sample(std::span<const raster::TileId> tiles, const std::filesystem::path& path) {
  std::string text;
  for (const auto& t : tiles) text += t.tile_code + "\n";
  write_text(path, text);
}

std::vector<std::string> read_sample(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace gfm::sampler
