#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/sampler/sampler.hpp"

using namespace gfm;
using namespace gfm::sampler;

namespace {

ClimateGrid random_grid(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  ClimateGrid g;
  for (std::size_t i = 0; i < n; ++i) {
    g.cells.push_back({{1 + static_cast<int>(i % 60), 'S', "T" + std::to_string(i)},
                       rng.uniform(-10, 30), rng.uniform(0, 100)});
  }
  return g;
}

// Grid whose cells fall into `groups` (g1 = groups, g2 = 1) of given sizes.
GroupAssignment sized_groups(const std::vector<std::size_t>& sizes) {
  GroupAssignment a;
  a.group_count = static_cast<int>(sizes.size());
  a.mean_bins = a.group_count;
  std::size_t id = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (std::size_t k = 0; k < sizes[g]; ++k) {
      a.tiles.push_back({1, 'S', "G" + std::to_string(g) + "_" + std::to_string(id++)});
      a.group.push_back(static_cast<int>(g));
    }
  }
  return a;
}

int group_of_code(const std::string& code) { return std::stoi(code.substr(1, code.find('_') - 1)); }

}  // namespace

TEST(AssignGroups, FourByFiveGivesAtMostTwentyGroups) {
  auto a = assign_groups(random_grid(400, 1), 4, 5);
  EXPECT_EQ(a.group_count, 20);
  std::set<int> used(a.group.begin(), a.group.end());
  EXPECT_LE(used.size(), 20u);
  for (int g : a.group) {
    EXPECT_GE(g, 0);
    EXPECT_LT(g, 20);
  }
}

TEST(AssignGroups, SingleBinPutsEverythingInGroupZero) {
  auto a = assign_groups(random_grid(37, 2), 1, 1);
  for (int g : a.group) EXPECT_EQ(g, 0);
}

TEST(AssignGroups, MarginalBinsMatchSortAndSplitOracle) {
  auto grid = random_grid(100, 3);
  auto a = assign_groups(grid, 2, 2);
  // Oracle: the 50 smallest values of each variable form the lower bin.
  auto lower_half = [&](auto field) {
    std::vector<std::size_t> idx(grid.cells.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](auto x, auto y) { return field(grid.cells[x]) < field(grid.cells[y]); });
    return std::set<std::size_t>(idx.begin(), idx.begin() + 50);
  };
  auto low_mean = lower_half([](const ClimateCell& c) { return c.mean_value; });
  auto low_p99 = lower_half([](const ClimateCell& c) { return c.p99_value; });
  int mean_bin0 = 0, p99_bin0 = 0;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const int b1 = a.group[i] / 2;
    const int b2 = a.group[i] % 2;
    EXPECT_EQ(b1 == 0, low_mean.count(i) == 1);
    EXPECT_EQ(b2 == 0, low_p99.count(i) == 1);
    mean_bin0 += b1 == 0;
    p99_bin0 += b2 == 0;
  }
  EXPECT_EQ(mean_bin0, 50);
  EXPECT_EQ(p99_bin0, 50);
}

TEST(AssignGroups, TiesResolveToLowerBin) {
  ClimateGrid g;
  for (int i = 0; i < 4; ++i) g.cells.push_back({{1, 'S', "T" + std::to_string(i)}, 1.0 * (i >= 1), 0.0});
  // values 0,1,1,1 -> edge at sorted[1] = 1, so every 1 is in bin 0 too.
  auto a = assign_groups(g, 2, 1);
  for (int grp : a.group) EXPECT_EQ(grp, 0);
  EXPECT_TRUE(a.degenerate);
}

TEST(AssignGroups, IndependentOfCellOrder) {
  auto grid = random_grid(120, 4);
  auto a = assign_groups(grid, 4, 5);
  std::map<std::string, int> by_code;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) by_code[grid.cells[i].tile.tile_code] = a.group[i];
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto shuffled = grid;
    rng.shuffle(shuffled.cells);
    auto b = assign_groups(shuffled, 4, 5);
    for (std::size_t i = 0; i < shuffled.cells.size(); ++i) {
      EXPECT_EQ(b.group[i], by_code[shuffled.cells[i].tile.tile_code]);
    }
  }
}

TEST(AssignGroups, EmptyGridIsArgumentError) {
  EXPECT_THROW(assign_groups(ClimateGrid{}, 2, 2), ArgumentError);
}

TEST(StratifiedSample, TwentyGroupsBudgetHundredGivesFiveEach) {
  auto a = sized_groups(std::vector<std::size_t>(20, 9));
  auto tiles = stratified_sample(a, 100, 7);
  ASSERT_EQ(tiles.size(), 100u);
  std::map<int, int> per_group;
  for (const auto& t : tiles) ++per_group[group_of_code(t.tile_code)];
  for (int g = 0; g < 20; ++g) EXPECT_EQ(per_group[g], 5);
}

TEST(StratifiedSample, SmallGroupShortfallIsRedistributed) {
  // Even split of 20 over 4 groups is 5; group 0 only has 3 tiles. The two
  // spare units go to the groups with most remaining capacity: 2 then 1.
  const std::vector<std::size_t> pops{3, 10, 20, 8};
  EXPECT_EQ(group_quotas(pops, 20), (std::vector<std::size_t>{3, 6, 6, 5}));
  auto a = sized_groups(pops);
  auto tiles = stratified_sample(a, 20, 11);
  std::set<std::string> group0;
  for (const auto& t : tiles)
    if (group_of_code(t.tile_code) == 0) group0.insert(t.tile_code);
  EXPECT_EQ(group0.size(), 3u);
}

TEST(StratifiedSample, QuotaPropertiesHoldOnRandomPopulations) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> pops(1 + rng.uniform_int(12));
    for (auto& p : pops) p = rng.uniform_int(15);
    const std::size_t total = std::accumulate(pops.begin(), pops.end(), std::size_t{0});
    if (total == 0) continue;
    const std::size_t budget = 1 + rng.uniform_int(total);
    auto q = group_quotas(pops, budget);
    EXPECT_EQ(std::accumulate(q.begin(), q.end(), std::size_t{0}), budget);
    std::size_t lo = SIZE_MAX, hi = 0;
    bool any_capped = false;
    for (std::size_t g = 0; g < pops.size(); ++g) {
      EXPECT_LE(q[g], pops[g]);
      if (pops[g] == 0) continue;
      any_capped |= q[g] == pops[g];
      lo = std::min(lo, q[g]);
      hi = std::max(hi, q[g]);
    }
    if (!any_capped) EXPECT_LE(hi - lo, 1u);
  }
}

TEST(StratifiedSample, DeterministicNoDuplicatesAndGroupMajor) {
  auto grid = random_grid(300, 8);
  auto a = assign_groups(grid, 4, 5);
  auto s1 = stratified_sample(a, 60, 123);
  auto s2 = stratified_sample(a, 60, 123);
  EXPECT_EQ(s1, s2);
  std::set<std::string> codes;
  std::map<std::string, int> group_of;
  for (std::size_t i = 0; i < a.tiles.size(); ++i) group_of[a.tiles[i].tile_code] = a.group[i];
  int last_group = -1;
  for (const auto& t : s1) {
    EXPECT_TRUE(codes.insert(t.tile_code).second);
    EXPECT_GE(group_of[t.tile_code], last_group);
    last_group = group_of[t.tile_code];
  }
}

TEST(StratifiedSample, BudgetAbovePopulationIsArgumentError) {
  auto a = sized_groups({2, 2});
  EXPECT_THROW(stratified_sample(a, 5, 1), ArgumentError);
  EXPECT_THROW(stratified_sample(a, 0, 1), ArgumentError);
}

TEST(StratifiedSample, SelectionFrequencyIsUniformWithinGroup) {
  const std::vector<std::size_t> pops{10, 6, 4};
  auto a = sized_groups(pops);
  const std::size_t budget = 9;  // quotas 3,3,3
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (const auto& t : stratified_sample(a, budget, seed)) ++hits[t.tile_code];
  }
  const auto quota = group_quotas(pops, budget);
  for (std::size_t i = 0; i < a.tiles.size(); ++i) {
    const auto g = static_cast<std::size_t>(a.group[i]);
    const double expected = static_cast<double>(quota[g]) / pops[g];
    EXPECT_NEAR(hits[a.tiles[i].tile_code] / 1000.0, expected, 0.05) << a.tiles[i].tile_code;
  }
}

TEST(ClimateGridCsv, RoundTripAndParseErrors) {
  auto dir = std::filesystem::temp_directory_path() / "gfm_sampler_test";
  std::filesystem::create_directories(dir);
  auto grid = random_grid(15, 9);
  write_climate_grid(grid, dir / "grid.csv");
  auto back = read_climate_grid(dir / "grid.csv");
  ASSERT_EQ(back.cells.size(), grid.cells.size());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    EXPECT_EQ(back.cells[i].tile, grid.cells[i].tile);
    EXPECT_EQ(back.cells[i].mean_value, grid.cells[i].mean_value);
    EXPECT_EQ(back.cells[i].p99_value, grid.cells[i].p99_value);
  }
  write_text(dir / "bad.csv", "tile_code,utm_zone,lat_band,mean_value,p99_value\nA,1,S,x,2\n");
  EXPECT_THROW(read_climate_grid(dir / "bad.csv"), ParseError);
  write_text(dir / "bad2.csv", "wrong header\n");
  EXPECT_THROW(read_climate_grid(dir / "bad2.csv"), ParseError);

  std::vector<raster::TileId> tiles{grid.cells[0].tile, grid.cells[3].tile};
  write_sample(tiles, dir / "sample.txt");
  EXPECT_EQ(read_sample(dir / "sample.txt"),
            (std::vector<std::string>{tiles[0].tile_code, tiles[1].tile_code}));
}
