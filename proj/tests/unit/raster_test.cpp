#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gfm/common/binary_io.hpp"
#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/raster/band_stats.hpp"
#include "gfm/raster/chip_io.hpp"
#include "gfm/raster/synthetic.hpp"

namespace fs = std::filesystem;
using namespace gfm;
using namespace gfm::raster;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gfm_raster_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RasterChip random_chip(Rng& rng, std::uint32_t t, std::uint32_t c, std::uint32_t h,
                       std::uint32_t w) {
  ChipDims dims{t, c, h, w};
  std::vector<std::uint16_t> data(dims.count());
  for (auto& v : data) v = static_cast<std::uint16_t>(rng.uniform_int(10000));
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < c; ++i) names.push_back("B" + std::to_string(i));
  std::vector<std::string> ts;
  for (std::uint32_t i = 0; i < t; ++i) ts.push_back(synthetic_date(static_cast<int>(16 * i)));
  return RasterChip(dims, std::move(data), names, ts, {{13, 'T', "13TAB"}, 5, 7}, 65535.0);
}

RasterChip single_band(std::vector<float> values, std::uint32_t h, std::uint32_t w) {
  return RasterChip({1, 1, h, w}, std::move(values), {"B02"}, {"2020-01-01"},
                    {{1, 'S', "X"}, 0, 0}, -9999.0);
}

}  // namespace

TEST(ChipIo, RoundTripFullSizeChipIsBitExact) {
  Rng rng(1);
  auto chip = random_chip(rng, 3, 6, 224, 224);
  auto path = temp_dir("rt") / "chip.gfmc";
  write_chip(chip, path);
  const auto bytes = read_file(path);
  auto back = read_chip(path);
  EXPECT_EQ(back, chip);
  EXPECT_EQ(encode_chip(back), bytes);
}

TEST(ChipIo, TinyChipValuesSurvive) {
  RasterChip chip({1, 1, 2, 2}, std::vector<std::uint16_t>{0, 1, 2, 3}, {"B02"}, {"2021-05-01"},
                  {{10, 'S', "10SEG"}, 0, 0}, 0.0);
  auto back = decode_chip(encode_chip(chip));
  auto v = back.values<std::uint16_t>();
  EXPECT_EQ(std::vector<std::uint16_t>(v.begin(), v.end()),
            (std::vector<std::uint16_t>{0, 1, 2, 3}));
  EXPECT_EQ(back.origin().tile.tile_code, "10SEG");
}

TEST(ChipIo, FloatChipRoundTripsIncludingNaN) {
  std::vector<float> values{1.5f, -2.25f, std::nanf(""), 1e30f};
  auto chip = single_band(values, 2, 2);
  EXPECT_EQ(decode_chip(encode_chip(chip)), chip);
}

TEST(ChipIo, RoundTripPropertyOverRandomShapes) {
  Rng rng(7);
  for (int i = 0; i < 25; ++i) {
    auto chip = random_chip(rng, 1 + rng.uniform_int(4), 1 + rng.uniform_int(7),
                            1 + rng.uniform_int(19), 1 + rng.uniform_int(19));
    EXPECT_EQ(decode_chip(encode_chip(chip)), chip);
  }
}

TEST(ChipIo, AlteredMagicIsFormatError) {
  Rng rng(2);
  auto bytes = encode_chip(random_chip(rng, 1, 1, 4, 4));
  bytes[0] = std::byte{'X'};
  EXPECT_THROW(decode_chip(bytes), FormatError);
}

TEST(ChipIo, TruncatedPayloadIsCorruption) {
  Rng rng(3);
  auto bytes = encode_chip(random_chip(rng, 2, 3, 8, 8));
  bytes.resize(bytes.size() - 5);
  EXPECT_THROW(decode_chip(bytes), CorruptionError);
}

TEST(ChipIo, QualityMasksRoundTrip) {
  auto [chip, masks] = generate_synthetic_tile(11, 64, 3, 0.3);
  auto back = decode_quality_masks(encode_quality_masks(masks));
  EXPECT_EQ(back, masks);
  EXPECT_THROW(decode_chip(encode_quality_masks(masks)), FormatError);
  EXPECT_THROW(decode_quality_masks(encode_chip(chip)), FormatError);
}

TEST(RasterChip, RejectsNonIncreasingTimestamps) {
  EXPECT_THROW(RasterChip({2, 1, 1, 1}, std::vector<std::uint16_t>{1, 2}, {"B"},
                          {"2020-02-01", "2020-01-01"}, {{1, 'S', "X"}, 0, 0}, 0.0),
               ArgumentError);
  EXPECT_THROW(RasterChip({1, 1, 1, 1}, std::vector<std::uint16_t>{1}, {"B"}, {"2020-02-01"},
                          {{61, 'S', "X"}, 0, 0}, 0.0),
               ArgumentError);
}

TEST(BandStats, TwoPixelExample) {
  auto stats = compute_band_stats(std::vector{single_band({2.0f, 4.0f}, 1, 2)});
  EXPECT_DOUBLE_EQ(stats.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(stats.std[0], 1.0);
  EXPECT_EQ(stats.pixel_count, 2u);
}

TEST(BandStats, AllNodataIsEmptyInput) {
  auto chip = single_band({-9999.0f, -9999.0f}, 1, 2);
  EXPECT_THROW(compute_band_stats(std::vector{chip}), EmptyInputError);
}

TEST(BandStats, QualityMaskExcludesCloudyPixels) {
  auto chip = single_band({2.0f, 4.0f, 100.0f, 6.0f}, 2, 2);
  QualityMask q{2, 2, {kClear, kClear, kCloud, kClear}, chip.origin(), "2020-01-01"};
  std::vector<std::vector<QualityMask>> quality{{q}};
  auto stats = compute_band_stats(std::vector{chip}, quality);
  EXPECT_DOUBLE_EQ(stats.mean[0], 4.0);
  EXPECT_EQ(stats.pixel_count, 3u);
}

TEST(BandStats, MatchesTwoPassOracleAndIgnoresChunking) {
  Rng rng(99);
  std::vector<RasterChip> chips;
  for (int i = 0; i < 10; ++i) chips.push_back(random_chip(rng, 2, 4, 9 + i, 7));
  // Two-pass oracle.
  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  double n = 0.0;
  for (const auto& chip : chips) {
    const auto& d = chip.dims();
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t c = 0; c < d.c; ++c)
        for (std::size_t y = 0; y < d.h; ++y)
          for (std::size_t x = 0; x < d.w; ++x) sum[c] += chip.at(t, c, y, x);
    n += static_cast<double>(d.t) * d.h * d.w;
  }
  for (auto& s : sum) s /= n;
  for (const auto& chip : chips) {
    const auto& d = chip.dims();
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t c = 0; c < d.c; ++c)
        for (std::size_t y = 0; y < d.h; ++y)
          for (std::size_t x = 0; x < d.w; ++x) {
            const double e = chip.at(t, c, y, x) - sum[c];
            sq[c] += e * e;
          }
  }
  auto stats = compute_band_stats(chips);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(stats.mean[c], sum[c], 1e-9 * std::abs(sum[c]));
    const double oracle_std = std::sqrt(sq[c] / n);
    EXPECT_NEAR(stats.std[c], oracle_std, 1e-9 * oracle_std);
  }
  // Any split of the stream merges to the same answer.
  for (std::size_t split = 1; split < chips.size(); split += 3) {
    BandStatsAccumulator a, b;
    for (std::size_t i = 0; i < chips.size(); ++i) (i < split ? a : b).add(chips[i]);
    a.merge(b);
    auto merged = a.finish();
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(merged.mean[c], stats.mean[c], 1e-9 * std::abs(stats.mean[c]));
      EXPECT_NEAR(merged.std[c], stats.std[c], 1e-9 * stats.std[c]);
    }
  }
}

TEST(Standardize, ConstantBandAtMeanIsZero) {
  auto chip = single_band({5.0f, 5.0f, 5.0f, 5.0f}, 2, 2);
  BandStats stats{{5.0}, {2.0}, 4};
  auto out = standardize(chip, stats);
  for (float v : out.values<float>()) EXPECT_EQ(v, 0.0f);
}

TEST(Standardize, ZeroStdUsesEpsilon) {
  auto chip = single_band({5.0f, 6.0f}, 1, 2);
  BandStats stats{{5.0}, {0.0}, 2};
  auto out = standardize(chip, stats);
  for (float v : out.values<float>()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_FLOAT_EQ(out.values<float>()[1], 1e6f);
}

TEST(Standardize, InverseRecoversInput) {
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    auto chip = random_chip(rng, 2, 3, 6, 5);
    auto stats = compute_band_stats(std::vector{chip});
    auto back = unstandardize(standardize(chip, stats), stats);
    auto orig = chip.to_float();
    auto got = back.values<float>();
    // f32 round trip: error is relative to the band's magnitude.
    const float scale = *std::max_element(orig.begin(), orig.end());
    for (std::size_t k = 0; k < orig.size(); ++k) EXPECT_NEAR(got[k], orig[k], 1e-5 * scale);
  }
}

TEST(Standardize, BandMismatchIsShapeError) {
  auto chip = single_band({1.0f}, 1, 1);
  EXPECT_THROW(standardize(chip, BandStats{{0.0, 0.0}, {1.0, 1.0}, 1}), ShapeError);
}

TEST(Synthetic, SameSeedIsBitIdentical) {
  auto a = generate_synthetic_tile(42, 64, 3, 0.2);
  auto b = generate_synthetic_tile(42, 64, 3, 0.2);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  auto c = generate_synthetic_tile(43, 64, 3, 0.2);
  EXPECT_FALSE(a.first == c.first);
}

TEST(Synthetic, ZeroCloudFractionIsAllClear) {
  auto [chip, masks] = generate_synthetic_tile(3, 96, 2, 0.0);
  for (const auto& m : masks)
    for (auto code : m.codes) EXPECT_EQ(code, kClear);
}

TEST(Synthetic, CloudFractionIsApproximatelyHonoured) {
  for (double target : {0.05, 0.2, 0.5, 0.8}) {
    auto [chip, masks] = generate_synthetic_tile(17, 256, 2, target);
    for (const auto& m : masks) {
      const auto bad = std::count_if(m.codes.begin(), m.codes.end(),
                                     [](std::uint8_t c) { return c != kClear; });
      const double frac = static_cast<double>(bad) / m.codes.size();
      EXPECT_GE(frac, target * 0.9) << target;
      EXPECT_LE(frac, target * 1.1) << target;
      if (target == 0.5) {
        EXPECT_GE(frac, 0.4);
        EXPECT_LE(frac, 0.6);
      }
    }
  }
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(generate_synthetic_tile(1, 64, 1, 1.5), ArgumentError);
  EXPECT_THROW(generate_synthetic_tile(1, 16, 1, 0.1), ArgumentError);
  EXPECT_THROW(generate_synthetic_tile(1, 64, 0, 0.1), ArgumentError);
}

TEST(Synthetic, ScenesContainWaterAndLand) {
  int with_both = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto scene = generate_synthetic_scene(seed, 128, 1, 0.0);
    const auto water = std::count(scene.water.begin(), scene.water.end(), 1);
    if (water > 0 && water < static_cast<long>(scene.water.size())) ++with_both;
  }
  EXPECT_GE(with_both, 5);
}

TEST(CutWindow, ExtractsTheRequestedBlock) {
  auto [tile, masks] = generate_synthetic_tile(9, 64, 4, 0.0);
  std::vector<std::string> ts{tile.timestamps()[1], tile.timestamps()[3]};
  auto cut = cut_window(tile, ts, 8, 16, 32, 24);
  EXPECT_EQ(cut.dims(), (ChipDims{2, 6, 24, 32}));
  EXPECT_EQ(cut.at(1, 4, 2, 3), tile.at(3, 4, 18, 11));
  EXPECT_THROW(cut_window(tile, ts, 40, 0, 32, 24), ShapeError);
  std::vector<std::string> missing{"1999-01-01"};
  EXPECT_THROW(cut_window(tile, missing, 0, 0, 8, 8), MissingSourceError);
}
