#include "gfm/mae/mask_plan.hpp"

#include <algorithm>
#include <cmath>

#include "gfm/common/rng.hpp"

namespace gfm::mae {

namespace {

constexpr std::uint8_t kDefaultBad[] = {1, 2, 3, 255};

}  // namespace

void MaskPlan::validate() const {
  if (masked.size() + visible.size() != total) {
    throw ShapeError("mask plan: " + std::to_string(masked.size()) + " masked + " +
                     std::to_string(visible.size()) + " visible != " + std::to_string(total));
  }
  std::vector<char> seen(total, 0);
  for (const auto* set : {&masked, &visible}) {
    for (auto i : *set) {
      if (i >= total || seen[i]) throw ShapeError("mask plan is not a partition of the tokens");
      seen[i] = 1;
    }
  }
}

MaskPlan make_mask_plan(std::size_t tokens, double ratio, std::uint64_t seed) {
  if (tokens == 0) throw ArgumentError("mask plan needs at least one token");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("mask ratio must be in (0, 1)");
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(tokens)));
  std::vector<std::size_t> order(tokens);
  for (std::size_t i = 0; i < tokens; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  MaskPlan plan;
  plan.total = tokens;
  plan.origin = MaskOrigin::kRandom;
  plan.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  plan.visible.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  std::sort(plan.visible.begin(), plan.visible.end());
  return plan;
}

std::vector<std::uint8_t> bad_pixel_flags(const raster::QualityMask& mask,
                                          std::span<const std::uint8_t> bad_codes) {
  if (bad_codes.empty()) bad_codes = kDefaultBad;
  bool bad[256] = {};
  for (auto c : bad_codes) bad[c] = true;
  std::vector<std::uint8_t> flags(mask.codes.size());
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = bad[mask.codes[i]] ? 1 : 0;
  return flags;
}

MaskPlan make_mask_plan_from_quality(const nn::PatchGeometry& grid,
                                     std::span<const raster::QualityMask> masks,
                                     std::size_t target_t,
                                     std::span<const std::uint8_t> bad_codes) {
  grid.validate();
  if (masks.size() != grid.t) {
    throw ShapeError("quality plan: " + std::to_string(masks.size()) + " masks for " +
                     std::to_string(grid.t) + " timesteps");
  }
  if (target_t >= grid.t) throw IndexError("quality plan: target timestep out of range");
  const auto& m = masks[target_t];
  if (m.height != grid.h || m.width != grid.w) {
    throw ShapeError("quality plan: mask " + std::to_string(m.height) + "x" +
                     std::to_string(m.width) + " vs input " + std::to_string(grid.h) + "x" +
                     std::to_string(grid.w));
  }
  const auto flags = bad_pixel_flags(m, bad_codes);
  const std::size_t gt = target_t / grid.pt;
  std::vector<char> masked(grid.tokens(), 0);
  for (std::size_t gy = 0; gy < grid.grid_h(); ++gy) {
    for (std::size_t gx = 0; gx < grid.grid_w(); ++gx) {
      bool any = false;
      for (std::size_t y = gy * grid.ph; y < (gy + 1) * grid.ph && !any; ++y) {
        for (std::size_t x = gx * grid.pw; x < (gx + 1) * grid.pw; ++x) {
          if (flags[y * grid.w + x]) {
            any = true;
            break;
          }
        }
      }
      if (any) masked[grid.token_index(gt, gy, gx)] = 1;
    }
  }
  MaskPlan plan;
  plan.total = grid.tokens();
  plan.origin = MaskOrigin::kQuality;
  for (std::size_t i = 0; i < plan.total; ++i) {
    (masked[i] ? plan.masked : plan.visible).push_back(i);
  }
  if (plan.masked.empty()) {
    throw EmptyInputError("quality plan: no bad pixels in timestep " + std::to_string(target_t));
  }
  return plan;
}

MaskPlan visible_plan(std::size_t tokens) {
  MaskPlan plan;
  plan.total = tokens;
  plan.visible.resize(tokens);
  for (std::size_t i = 0; i < tokens; ++i) plan.visible[i] = i;
  return plan;
}

}  // namespace gfm::mae
