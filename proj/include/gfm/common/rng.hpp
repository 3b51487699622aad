#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gfm {

/// Mixes a base seed with stream identifiers (SplitMix64 finalizer), so that
/// independent consumers (per batch, per sample, per group) get decorrelated
/// generators from one user-facing seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Seeded generator with portable distributions. The std:: distributions are
/// implementation-defined, so everything here is computed from raw engine
/// output to keep results identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n), unbiased
  double normal();
  double truncated_normal(double stddev, double bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gfm
