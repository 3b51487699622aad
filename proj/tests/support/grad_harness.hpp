#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gfm/common/rng.hpp"
#include "gfm/nn/gradcheck.hpp"
#include "gfm/nn/param_store.hpp"

namespace gfm::testing {

// One differentiable quantity: its live values and the analytic gradient.
struct GradTarget {
  std::string name;
  std::span<double> values;
  std::vector<double> analytic;
};

struct GradReport {
  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
};

inline constexpr double kGradStep = 1e-5;
inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradFloor = 1e-6;

// Compares each target's analytic gradient against central differences of f.
// With max_coords > 0, each target is spot-checked at that many random coordinates.
inline GradReport check_gradients(const std::function<double()>& f,
                                  std::vector<GradTarget>& targets, std::size_t max_coords = 0,
                                  std::uint64_t seed = 0) {
  GradReport report;
  Rng rng(seed);
  for (auto& t : targets) {
    std::vector<std::size_t> coords;
    if (max_coords > 0 && t.values.size() > max_coords) {
      std::vector<std::size_t> all(t.values.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      rng.shuffle(std::span<std::size_t>(all));
      coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(max_coords));
    } else {
      for (std::size_t i = 0; i < t.values.size(); ++i) coords.push_back(i);
    }
    const auto numeric = nn::numeric_gradient(f, t.values, kGradStep, coords);
    std::vector<double> analytic;
    for (auto c : coords) analytic.push_back(t.analytic[c]);
    const double err = nn::relative_error(analytic, numeric, kGradFloor);
    report.coords += coords.size();
    if (err >= report.worst) {
      report.worst = err;
      report.worst_name = t.name;
    }
  }
  return report;
}

// Adds every parameter of the store (with its current gradient) as a target.
inline void add_param_targets(nn::ParamStore<double>& store, std::vector<GradTarget>& out) {
  for (auto& [name, p] : store.entries()) {
    if (!p.trainable) continue;
    std::vector<double> g(p.value.size(), 0.0);
    if (p.has_grad()) g.assign(p.grad.values().begin(), p.grad.values().end());
    out.push_back({name, p.value.values(), std::move(g)});
  }
}

// Replaces parameter values with N(0, scale^2) draws so checks exercise non-trivial regimes.
inline void randomize(nn::ParamStore<double>& store, Rng& rng, double scale = 0.5) {
  for (auto& [name, p] : store.entries()) {
    for (auto& v : p.value.values()) v = rng.normal() * scale;
  }
}

inline std::vector<double> random_values(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * scale;
  return v;
}

// Inner product used to reduce an op output to a scalar.
inline double project(std::span<const double> y, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace gfm::testing
