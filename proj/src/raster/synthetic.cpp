#include "gfm/raster/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"

namespace gfm::raster {

namespace {

double hash_unit(std::uint64_t seed, std::uint64_t a, std::int64_t b, std::int64_t c) {
  const std::uint64_t h = derive_seed(seed, a, static_cast<std::uint64_t>(b),
                                      static_cast<std::uint64_t>(c));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Lattice value noise in [-1, 1], interpolated with a C2 fade.
double value_noise(std::uint64_t seed, std::uint64_t stream, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double u = quintic(x - fx);
  const double v = quintic(y - fy);
  auto corner = [&](std::int64_t dx, std::int64_t dy) {
    return 2.0 * hash_unit(seed, stream, ix + dx, iy + dy) - 1.0;
  };
  const double top = corner(0, 0) + u * (corner(1, 0) - corner(0, 0));
  const double bottom = corner(0, 1) + u * (corner(1, 1) - corner(0, 1));
  return top + v * (bottom - top);
}

double fbm(std::uint64_t seed, std::uint64_t field, double x, double y, double period,
           int octaves) {
  double sum = 0.0;
  double norm = 0.0;
  double amp = 1.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(seed, field * 64 + static_cast<std::uint64_t>(o), x / period, y / period);
    norm += amp;
    amp *= 0.5;
    period *= 0.5;
  }
  return sum / norm;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Paints cloud ellipses (plus adjacent rings and occasional shadows) until
// the non-clear fraction reaches the target. Each ellipse is sized so it
// cannot overshoot what is still missing.
void paint_clouds(std::vector<std::uint8_t>& codes, std::uint32_t size, double target, Rng& rng) {
  const double total = static_cast<double>(size) * size;
  if (target >= 0.999) {
    std::fill(codes.begin(), codes.end(), std::uint8_t{kCloud});
    return;
  }
  auto bad_count = [&] {
    return static_cast<double>(std::count_if(codes.begin(), codes.end(),
                                             [](std::uint8_t c) { return c != kClear; }));
  };
  double bad = bad_count();
  const double tol = 0.25 / total + 0.002;
  for (int iter = 0; iter < 20000 && bad / total < target - tol; ++iter) {
    const double remaining_px = (target - bad / total) * total;
    const bool shadow = rng.uniform() < 0.3;
    double a = rng.uniform(0.04, 0.12) * size;
    double b = a * rng.uniform(0.5, 1.0);
    const double footprint = std::numbers::pi * a * b * 1.5625 * (shadow ? 2.0 : 1.0);
    if (footprint > remaining_px) {
      const double s = std::sqrt(remaining_px / footprint);
      a *= s;
      b *= s;
    }
    a = std::max(a, 0.75);
    b = std::max(b, 0.75);
    const double cx = rng.uniform(0.0, size);
    const double cy = rng.uniform(0.0, size);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double sx = 0.08 * size;
    const double sy = 0.06 * size;
    auto stamp = [&](double ox, double oy, bool is_shadow) {
      const double reach = a * 1.25 + 1.0;
      const int x0 = std::max(0, static_cast<int>(std::floor(ox - reach)));
      const int x1 = std::min(static_cast<int>(size) - 1, static_cast<int>(std::ceil(ox + reach)));
      const int y0 = std::max(0, static_cast<int>(std::floor(oy - reach)));
      const int y1 = std::min(static_cast<int>(size) - 1, static_cast<int>(std::ceil(oy + reach)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dx = x + 0.5 - ox;
          const double dy = y + 0.5 - oy;
          const double u = (dx * ct + dy * st) / a;
          const double v = (-dx * st + dy * ct) / b;
          const double r2 = u * u + v * v;
          auto& code = codes[static_cast<std::size_t>(y) * size + x];
          if (is_shadow) {
            if (r2 <= 1.0 && code == kClear) code = kCloudShadow;
          } else if (r2 <= 1.0) {
            code = kCloud;
          } else if (r2 <= 1.5625 && (code == kClear || code == kCloudShadow)) {
            code = kAdjacent;
          }
        }
      }
    };
    if (shadow) stamp(cx + sx, cy + sy, true);
    stamp(cx, cy, false);
    bad = bad_count();
  }
}

struct Signature {
  double base[6];
  double soil[6];
  double veg[6];
  double moist[6];
};

constexpr Signature kLand{{600, 900, 1000, 2500, 2200, 1500},
                          {300, 350, 500, 300, 700, 600},
                          {-150, 100, -400, 1200, -300, -200},
                          {-50, -50, -50, -100, -300, -400}};
constexpr double kWater[6] = {750, 650, 420, 220, 110, 70};

}  // namespace

std::string synthetic_date(int days) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{year{2020} / 1 / 1} + std::chrono::days{days}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

TileId synthetic_tile_id(std::uint64_t seed) {
  const int zone = static_cast<int>(10 + seed % 10);
  const char band = "RSTU"[seed % 4];
  const char l1 = static_cast<char>('A' + (seed / 4) % 26);
  const char l2 = static_cast<char>('A' + (seed / 104) % 26);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02d%c%c%c%06llu", zone, band, l1, l2,
                static_cast<unsigned long long>(seed % 1000000));
  return TileId{zone, band, buf};
}

QualityMask generate_cloud_mask(std::uint64_t seed, std::uint32_t size, double cloud_fraction,
                                const ChipOrigin& origin, const std::string& timestamp) {
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) {
    throw ArgumentError("cloud_fraction must lie in [0, 1]");
  }
  QualityMask mask{size, size, std::vector<std::uint8_t>(std::size_t{size} * size, kClear), origin,
                   timestamp};
  Rng rng(derive_seed(seed, 0xC10D));
  if (cloud_fraction > 0.0) paint_clouds(mask.codes, size, cloud_fraction, rng);
  return mask;
}

SyntheticScene generate_synthetic_scene(std::uint64_t seed, std::uint32_t size, std::uint32_t t,
                                        double cloud_fraction) {
  if (size < 32) throw ArgumentError("synthetic tile size must be >= 32");
  if (t < 1) throw ArgumentError("synthetic tile needs t >= 1");
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) {
    throw ArgumentError("cloud_fraction must lie in [0, 1]");
  }
  constexpr std::uint32_t kBands = 6;
  Rng tile_rng(derive_seed(seed, 0x7115));
  const double brightness = tile_rng.uniform(0.75, 1.25);
  const double water_level = tile_rng.uniform(0.05, 0.3);
  const double season_phase = tile_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const int first_day = static_cast<int>(tile_rng.uniform_int(120));
  const TileId tile = synthetic_tile_id(seed);

  const std::size_t plane = std::size_t{size} * size;
  std::vector<double> soil(plane), veg(plane), moist(plane), water_depth(plane);
  std::vector<std::uint8_t> water(plane);
  for (std::uint32_t y = 0; y < size; ++y) {
    for (std::uint32_t x = 0; x < size; ++x) {
      const std::size_t i = std::size_t{y} * size + x;
      soil[i] = fbm(seed, 1, x, y, 48.0, 4);
      veg[i] = fbm(seed, 2, x, y, 40.0, 4);
      moist[i] = fbm(seed, 3, x, y, 56.0, 3);
      const double w = fbm(seed, 4, x, y, 64.0, 4);
      water_depth[i] = w - water_level;
      water[i] = water_depth[i] > 0.0 ? 1 : 0;
    }
  }

  ChipDims dims{t, kBands, size, size};
  std::vector<std::uint16_t> data(dims.count());
  std::vector<std::string> timestamps;
  std::vector<QualityMask> quality;
  for (std::uint32_t ti = 0; ti < t; ++ti) {
    const int day = first_day + 16 * static_cast<int>(ti);
    timestamps.push_back(synthetic_date(day));
    const double season = std::sin(2.0 * std::numbers::pi * day / 365.0 + season_phase);
    const double drift = 1.0 + 0.04 * season;
    QualityMask mask = generate_cloud_mask(derive_seed(seed, 0xC1, ti), size, cloud_fraction,
                                           ChipOrigin{tile, 0, 0}, timestamps.back());
    for (std::uint32_t y = 0; y < size; ++y) {
      for (std::uint32_t x = 0; x < size; ++x) {
        const std::size_t i = std::size_t{y} * size + x;
        const double wobble = 0.06 * fbm(seed, 16 + ti, x, y, 24.0, 2);
        const double v = veg[i] + 0.35 * season + wobble;
        const double alpha = smoothstep(-0.01, 0.01, water_depth[i]);
        const std::uint8_t code = mask.codes[i];
        for (std::uint32_t c = 0; c < kBands; ++c) {
          const double land = (kLand.base[c] + kLand.soil[c] * soil[i] + kLand.veg[c] * v +
                               kLand.moist[c] * moist[i]) *
                              brightness * drift;
          const double wet = kWater[c] * (1.0 + 0.3 * moist[i]) * drift;
          double r = (1.0 - alpha) * land + alpha * wet;
          r += 40.0 * (hash_unit(seed, 0xA0 + ti * 8 + c, x, y) - 0.5);
          if (code == kCloud) {
            r = 7000.0 + 1500.0 * hash_unit(seed, 0xB0 + ti, x, y) - 250.0 * c;
          } else if (code == kAdjacent) {
            r = 0.6 * r + 2200.0;
          } else if (code == kCloudShadow) {
            r = 0.45 * r;
          }
          data[dims.offset(ti, c, y, x)] =
              static_cast<std::uint16_t>(std::lround(std::clamp(r, 0.0, 10000.0)));
        }
      }
    }
    quality.push_back(std::move(mask));
  }

  RasterChip chip(dims, std::move(data), default_band_names(), std::move(timestamps),
                  ChipOrigin{tile, 0, 0}, 65535.0);
  return SyntheticScene{std::move(chip), std::move(quality), std::move(water)};
}

std::pair<RasterChip, std::vector<QualityMask>> generate_synthetic_tile(std::uint64_t seed,
                                                                        std::uint32_t size,
                                                                        std::uint32_t t,
                                                                        double cloud_fraction) {
  auto scene = generate_synthetic_scene(seed, size, t, cloud_fraction);
  return {std::move(scene.chip), std::move(scene.quality)};
}

}  // namespace gfm::raster
