#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace gfm::testing {

// Per-pixel SSIM evaluated straight from the definition (11x11 Gaussian, sigma 1.5).
inline double ssim_oracle(std::span<const double> a, std::span<const double> b, std::size_t h,
                          std::size_t w, double range) {
  const int k = 11;
  double wsum = 0.0;
  std::vector<double> g(k * k);
  for (int y = 0; y < k; ++y) {
    for (int x = 0; x < k; ++x) {
      const double r2 = (y - 5) * (y - 5) + (x - 5) * (x - 5);
      g[y * k + x] = std::exp(-r2 / (2 * 1.5 * 1.5));
      wsum += g[y * k + x];
    }
  }
  for (auto& v : g) v /= wsum;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + k <= h; ++y) {
    for (std::size_t x = 0; x + k <= w; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < k * k; ++i) {
        const std::size_t p = (y + i / k) * w + x + i % k;
        ma += g[i] * a[p];
        mb += g[i] * b[p];
      }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < k * k; ++i) {
        const std::size_t p = (y + i / k) * w + x + i % k;
        va += g[i] * (a[p] - ma) * (a[p] - ma);
        vb += g[i] * (b[p] - mb) * (b[p] - mb);
        cov += g[i] * (a[p] - ma) * (b[p] - mb);
      }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

// Pixel-by-pixel tallies; ground truth 255 is skipped.
struct BruteCounts {
  std::vector<double> tp, fp, fn;
  std::size_t valid = 0, correct = 0;
};

inline BruteCounts brute_force_counts(std::span<const std::uint8_t> pred,
                                      std::span<const std::uint8_t> gt, std::size_t k) {
  BruteCounts r{std::vector<double>(k), std::vector<double>(k), std::vector<double>(k)};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == 255) continue;
    ++r.valid;
    if (gt[i] == pred[i]) {
      r.tp[gt[i]] += 1;
      ++r.correct;
    } else {
      r.fp[pred[i]] += 1;
      r.fn[gt[i]] += 1;
    }
  }
  return r;
}

}  // namespace gfm::testing
